//! Command-line harness: single runs, parallel sweeps, synthetic corpora
//! and report generation.
//!
//! Exit codes: 0 success, 1 configuration error (bad flags, unreadable or
//! invalid inputs), 2 runtime error (a run failed mid-flight).

/// Print to stdout, ignoring broken pipes so `replaymem ... | head` ends
/// quietly instead of panicking mid-report.
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

mod report;
mod svg;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use replaymem::config::ExperimentConfig;
use replaymem::data::{load_tasks, write_synthetic, SyntheticSpec};
use replaymem::metrics;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "replaymem",
    about = "Episodic-memory population policies for lifelong learning streams",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its metrics CSV.
    Run(RunArgs),
    /// Run a capacity x policy x seed cross-product in parallel.
    Sweep(sweep::SweepArgs),
    /// Generate synthetic corpora, manifests and an order file.
    GenData(GenDataArgs),
    /// Aggregate metrics CSVs into summary tables and SVG charts.
    Report(report::ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (default: metrics.csv next to the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenDataArgs {
    /// Synthetic corpus spec (JSON). Omit with --benchmark for the shipped
    /// five-task drifted benchmark.
    #[arg(long, conflicts_with = "benchmark")]
    spec: Option<PathBuf>,
    /// Use the shipped benchmark spec.
    #[arg(long)]
    benchmark: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let config = ExperimentConfig::from_file(path).map_err(CliError::config)?;
    config.validate().map_err(CliError::config)?;
    Ok(config)
}

/// Bad inputs are configuration errors (exit 1); failures mid-run are
/// runtime errors (exit 2).
pub(crate) fn classify_train_error(e: replaymem::TrainError) -> CliError {
    use replaymem::{MemoryError, TrainError};
    match &e {
        TrainError::Config(_)
        | TrainError::NoTasks
        | TrainError::UnknownTask(_)
        | TrainError::EmptyTrainSplit(_)
        | TrainError::EmptyTestSplit(_)
        | TrainError::Memory(MemoryError::ZeroCapacity { .. }) => CliError::config(e),
        _ => CliError::runtime(e),
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    if config.tasks.is_empty() {
        return Err(CliError::Config(
            "config has no tasks; point `tasks` at corpus manifests".into(),
        ));
    }
    let tasks = load_tasks(&config.tasks).map_err(CliError::config)?;
    let record = replaymem::trainer::run(&config, &tasks).map_err(classify_train_error)?;

    let out = args.out.clone().unwrap_or_else(|| {
        args.config
            .parent()
            .unwrap_or_else(|| std::path::Path::new("."))
            .join("metrics.csv")
    });
    let mut bytes = Vec::new();
    metrics::write_records_csv(std::slice::from_ref(&record), &mut bytes)
        .map_err(CliError::runtime)?;
    std::fs::write(&out, bytes).map_err(CliError::runtime)?;

    outln!(
        "run {} finished: final avg accuracy {:.4}, memory {} entries, {} replay steps -> {}",
        record.run_id,
        record.final_avg_accuracy(),
        record.memory_len_final,
        record.replay_steps,
        out.display()
    );
    Ok(())
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<(), CliError> {
    let spec = match (&args.spec, args.benchmark) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<SyntheticSpec>(&text)
                .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?
        }
        (None, true) => replaymem::data::benchmark_spec(),
        (None, false) => return Err(CliError::Config("pass --spec <file> or --benchmark".into())),
    };
    let outputs = write_synthetic(&spec, &args.out).map_err(CliError::runtime)?;

    // a ready-to-run config wired to the generated data
    let mut config =
        replaymem::data::benchmark_config(replaymem::policies::PolicyKind::Reservoir, 0.10, 0);
    config.tasks = outputs.manifests.clone();
    let names: Vec<String> = outputs.manifests.iter().map(|m| m.name.clone()).collect();
    config.orders = replaymem::data::default_orders(&names);
    let config_path = args.out.join("config.example.json");
    std::fs::write(&config_path, config.to_json()).map_err(CliError::runtime)?;

    outln!(
        "wrote {} corpora, {}, {} and {}",
        outputs.corpus_paths.len(),
        outputs.manifest_path.display(),
        outputs.orders_path.display(),
        config_path.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => sweep::cmd_sweep(&args),
        Command::GenData(args) => cmd_gen_data(&args),
        Command::Report(args) => report::cmd_report(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage text; unknown flags and missing
            // arguments are configuration errors, --help/--version are not
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e @ CliError::Runtime(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
