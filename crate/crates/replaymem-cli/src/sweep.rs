//! Parallel experiment sweeps over capacities, policies, seeds and orders.
//!
//! Runs are fully isolated units; results merge into one metrics CSV sorted
//! by run id, so the merged bytes do not depend on scheduling. Failures are
//! reported per run without aborting siblings.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use replaymem::config::ExperimentConfig;
use replaymem::data::load_tasks;
use replaymem::metrics::{self, ExperimentRecord};
use replaymem::policies::PolicyKind;
use replaymem::stream::TaskData;

use crate::CliError;

#[derive(Args)]
pub struct SweepArgs {
    /// Base experiment config (JSON); the sweep overrides capacity, policy,
    /// seed and optionally order per run.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated capacity fractions, e.g. 0.1,0.3,0.5,0.7.
    #[arg(long, value_delimiter = ',')]
    capacities: Vec<f64>,
    /// Number of seeds; runs use seeds base..base+n.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Comma-separated policy names, or `all`.
    #[arg(long, default_value = "all")]
    policies: String,
    /// Comma-separated order names, or `all`; default is the config's order.
    #[arg(long)]
    orders: Option<String>,
    /// Output directory for metrics.csv and runtimes.csv.
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
}

fn parse_policies(arg: &str) -> Result<Vec<PolicyKind>, CliError> {
    if arg.trim() == "all" {
        return Ok(PolicyKind::ALL.to_vec());
    }
    arg.split(',')
        .map(|name| {
            PolicyKind::parse(name.trim()).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown policy {name:?} (expected one of {} or `all`)",
                    PolicyKind::ALL.map(|k| k.name()).join(", ")
                ))
            })
        })
        .collect()
}

fn parse_orders(arg: Option<&str>, config: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    match arg {
        None => Ok(vec![config.order.clone()]),
        Some("all") => {
            if config.orders.is_empty() {
                return Err(CliError::Config(
                    "--orders all needs named orders in the config".into(),
                ));
            }
            Ok(config.orders.keys().cloned().collect())
        }
        Some(list) => {
            let names: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
            for name in &names {
                if !config.orders.contains_key(name) {
                    return Err(CliError::Config(format!("order {name:?} is not defined")));
                }
            }
            Ok(names)
        }
    }
}

/// Thread cap from REPLAYMEM_THREADS; unset means rayon's default.
fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("REPLAYMEM_THREADS") {
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                CliError::Config(format!(
                    "REPLAYMEM_THREADS must be a positive integer, got {raw:?}"
                ))
            })?;
            if n == 0 {
                return Err(CliError::Config(
                    "REPLAYMEM_THREADS must be a positive integer".into(),
                ));
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("REPLAYMEM_THREADS: {e}"))),
    }
}

pub fn expand_runs(
    base: &ExperimentConfig,
    capacities: &[f64],
    policies: &[PolicyKind],
    orders: &[String],
    seeds: u64,
) -> Vec<ExperimentConfig> {
    let mut runs = Vec::new();
    for &capacity in capacities {
        for &policy in policies {
            for order in orders {
                for seed in base.seed..base.seed + seeds {
                    let mut config = base.clone();
                    config.capacity_fraction = capacity;
                    config.policy = policy;
                    config.order = order.clone();
                    config.seed = seed;
                    runs.push(config);
                }
            }
        }
    }
    runs
}

fn write_outputs(out: &PathBuf, records: &[ExperimentRecord]) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(CliError::runtime)?;
    let mut bytes = Vec::new();
    metrics::write_records_csv(records, &mut bytes).map_err(CliError::runtime)?;
    std::fs::write(out.join("metrics.csv"), bytes).map_err(CliError::runtime)?;

    let mut runtime_csv = String::from(
        "run_id,seed,order,policy,capacity_fraction,train_secs,eval_secs,adapt_secs\n",
    );
    for r in records {
        runtime_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.run_id,
            r.seed,
            r.order,
            r.policy,
            r.capacity_fraction,
            r.train_secs,
            r.eval_secs,
            r.adapt_secs
        ));
    }
    std::fs::write(out.join("runtimes.csv"), runtime_csv).map_err(CliError::runtime)?;
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let base = crate::load_config(&args.config)?;
    if base.tasks.is_empty() {
        return Err(CliError::Config(
            "config has no tasks; point `tasks` at corpus manifests".into(),
        ));
    }
    if args.capacities.is_empty() {
        return Err(CliError::Config("--capacities must not be empty".into()));
    }
    for &c in &args.capacities {
        if !(c > 0.0 && c <= 1.0) {
            return Err(CliError::Config(format!(
                "capacity fractions must be in (0, 1], got {c}"
            )));
        }
    }
    if args.seeds == 0 {
        return Err(CliError::Config("--seeds must be positive".into()));
    }
    let policies = parse_policies(&args.policies)?;
    let orders = parse_orders(args.orders.as_deref(), &base)?;
    let tasks: Vec<TaskData> = load_tasks(&base.tasks).map_err(CliError::config)?;

    let runs = expand_runs(&base, &args.capacities, &policies, &orders, args.seeds);
    eprintln!("sweep: {} runs", runs.len());

    let pool = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(CliError::runtime)?,
        None => rayon::ThreadPoolBuilder::new()
            .build()
            .map_err(CliError::runtime)?,
    };

    let results: Vec<(String, Result<ExperimentRecord, String>)> = pool.install(|| {
        runs.par_iter()
            .map(|config| {
                let id = config.run_id();
                let result = replaymem::trainer::run(config, &tasks).map_err(|e| e.to_string());
                (id, result)
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, result) in results {
        match result {
            Ok(record) => records.push(record),
            Err(message) => failures.push((id, message)),
        }
    }
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    write_outputs(&args.out, &records)?;

    outln!(
        "sweep finished: {} ok, {} failed -> {}",
        records.len(),
        failures.len(),
        args.out.join("metrics.csv").display()
    );
    for (id, message) in &failures {
        eprintln!("run {id} failed: {message}");
    }
    if !failures.is_empty() {
        return Err(CliError::Runtime(format!(
            "{} of {} runs failed",
            failures.len(),
            runs.len()
        )));
    }
    Ok(())
}
