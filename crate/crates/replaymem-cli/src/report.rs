//! Aggregate metrics CSVs into summary tables, per-figure CSVs and SVGs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::Args;

use replaymem::config::ExperimentConfig;
use replaymem::metrics::{self, MetricsRow};

use crate::svg::{self, Series};
use crate::CliError;

#[derive(Args)]
pub struct ReportArgs {
    /// Directory scanned (non-recursively) for metrics CSVs.
    #[arg(long = "in", required_unless_present = "print_config")]
    input: Option<PathBuf>,
    /// Output directory for tables and charts.
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
    /// Print the default experiment config, with every default explicit,
    /// and exit.
    #[arg(long)]
    print_config: bool,
}

fn is_metrics_file(path: &Path) -> bool {
    if path.extension().and_then(|e| e.to_str()) != Some("csv") {
        return false;
    }
    match std::fs::File::open(path) {
        Ok(file) => {
            let mut reader = csv::Reader::from_reader(file);
            reader
                .headers()
                .map(|h| h.iter().next() == Some("run_id") && h.iter().any(|c| c == "checkpoint"))
                .unwrap_or(false)
        }
        Err(_) => false,
    }
}

fn read_all_rows(dir: &Path) -> Result<Vec<MetricsRow>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| is_metrics_file(p))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!(
            "no metrics CSVs found in {}",
            dir.display()
        )));
    }
    let mut rows = Vec::new();
    for path in paths {
        let file = std::fs::File::open(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut parsed = metrics::read_rows_csv(file)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?;
        rows.append(&mut parsed);
    }
    Ok(rows)
}

fn float_key(v: f64) -> String {
    format!("{v}")
}

/// (policy, capacity key, task) aggregation cell.
type TaskCellKey = (String, String, String);

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Rows grouped by capacity.
fn by_capacity(rows: &[MetricsRow]) -> BTreeMap<String, Vec<&MetricsRow>> {
    let mut map: BTreeMap<String, Vec<&MetricsRow>> = BTreeMap::new();
    for row in rows {
        map.entry(float_key(row.capacity_fraction))
            .or_default()
            .push(row);
    }
    map
}

fn last_numeric_checkpoint(rows: &[&MetricsRow]) -> BTreeMap<String, u32> {
    let mut last: BTreeMap<String, u32> = BTreeMap::new();
    for row in rows {
        if let Ok(c) = row.checkpoint.parse::<u32>() {
            let e = last.entry(row.run_id.clone()).or_insert(0);
            *e = (*e).max(c);
        }
    }
    last
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    if args.print_config {
        outln!("{}", ExperimentConfig::default().to_json());
        return Ok(());
    }
    let input = args.input.as_ref().expect("required by clap");
    let out = args.out.as_ref().expect("required by clap");
    let rows = read_all_rows(input)?;
    std::fs::create_dir_all(out).map_err(CliError::runtime)?;

    let capacities = by_capacity(&rows);
    let multi_capacity = capacities.len() > 1;

    // Table-1-style summary per capacity: orders x policies plus avg. row
    for (cap, cap_rows) in &capacities {
        let owned: Vec<MetricsRow> = cap_rows.iter().map(|r| (*r).clone()).collect();
        let summary = metrics::summarize_rows(&owned);
        let name = if multi_capacity {
            format!("summary_cap{cap}.csv")
        } else {
            "summary.csv".to_string()
        };
        let mut bytes = Vec::new();
        metrics::write_summary_csv(&summary, &mut bytes).map_err(CliError::runtime)?;
        std::fs::write(out.join(&name), bytes).map_err(CliError::runtime)?;

        outln!("summary at capacity {cap}:");
        for row in &summary {
            outln!(
                "  {:<6} {:<16} {:.4} +/- {:.4}",
                row.order,
                row.policy,
                row.mean,
                row.std
            );
        }
    }

    // capacity sweep table (figure-2 shape)
    let mut sweep_cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (cap, cap_rows) in &capacities {
        let owned: Vec<MetricsRow> = cap_rows.iter().map(|r| (*r).clone()).collect();
        let finals = metrics::final_accuracy_by_run(&owned);
        let mut policy_of: BTreeMap<&str, &str> = BTreeMap::new();
        for row in &owned {
            policy_of
                .entry(row.run_id.as_str())
                .or_insert(row.policy.as_str());
        }
        for (run, value) in &finals {
            sweep_cells
                .entry((policy_of[run.as_str()].to_string(), cap.clone()))
                .or_default()
                .push(*value);
        }
    }
    let mut sweep_csv = String::from("policy,capacity_fraction,mean,std\n");
    for ((policy, cap), values) in &sweep_cells {
        sweep_csv.push_str(&format!(
            "{policy},{cap},{},{}\n",
            mean(values),
            sample_std(values)
        ));
    }
    std::fs::write(out.join("sweep.csv"), &sweep_csv).map_err(CliError::runtime)?;

    // per-task composition and usage/forgetting at the final checkpoint
    let mut composition_csv =
        String::from("policy,capacity_fraction,task,mem_fraction_raw,mem_fraction_normalized\n");
    let mut usage_csv = String::from("policy,capacity_fraction,task,usage,forgetting_final\n");
    let mut composition_cells: BTreeMap<TaskCellKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut forgetting_cells: BTreeMap<TaskCellKey, Vec<f64>> = BTreeMap::new();
    for (cap, cap_rows) in &capacities {
        let last = last_numeric_checkpoint(cap_rows);
        for row in cap_rows {
            if row.checkpoint.parse::<u32>().ok() != last.get(&row.run_id).copied() {
                continue;
            }
            let key = (row.policy.clone(), cap.clone(), row.task.clone());
            let cell = composition_cells.entry(key.clone()).or_default();
            cell.0.push(row.mem_fraction_raw);
            cell.1.push(row.mem_fraction_normalized);
            forgetting_cells
                .entry(key)
                .or_default()
                .push(row.forgetting_final);
        }
    }
    for ((policy, cap, task), (raw, normalized)) in &composition_cells {
        composition_csv.push_str(&format!(
            "{policy},{cap},{task},{},{}\n",
            mean(raw),
            mean(normalized)
        ));
        let forgetting = mean(&forgetting_cells[&(policy.clone(), cap.clone(), task.clone())]);
        usage_csv.push_str(&format!(
            "{policy},{cap},{task},{},{forgetting}\n",
            mean(raw)
        ));
    }
    std::fs::write(out.join("composition.csv"), &composition_csv).map_err(CliError::runtime)?;
    std::fs::write(out.join("forgetting_usage.csv"), &usage_csv).map_err(CliError::runtime)?;

    // adaptation table (figure-4 shape) when adapted rows exist
    let mut adapted_cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        if row.checkpoint == "adapted" {
            adapted_cells
                .entry((row.policy.clone(), float_key(row.capacity_fraction)))
                .or_default()
                .push(row.accuracy);
        }
    }
    if !adapted_cells.is_empty() {
        let mut adaptation_csv = String::from("policy,capacity_fraction,base_mean,adapted_mean\n");
        let mut fig4_policies = Vec::new();
        let mut fig4_base = Vec::new();
        let mut fig4_adapted = Vec::new();
        for ((policy, cap), values) in &adapted_cells {
            let base = sweep_cells
                .get(&(policy.clone(), cap.clone()))
                .map(|v| mean(v))
                .unwrap_or(f64::NAN);
            let adapted = mean(values);
            adaptation_csv.push_str(&format!("{policy},{cap},{base},{adapted}\n"));
            fig4_policies.push(format!("{policy}@{cap}"));
            fig4_base.push(base);
            fig4_adapted.push(adapted);
        }
        std::fs::write(out.join("adaptation.csv"), adaptation_csv).map_err(CliError::runtime)?;
        let chart = svg::grouped_bar_chart(
            "Local adaptation vs base accuracy",
            &fig4_policies,
            &[
                Series {
                    name: "base".into(),
                    values: fig4_base,
                },
                Series {
                    name: "adapted".into(),
                    values: fig4_adapted,
                },
            ],
            "accuracy",
        );
        std::fs::write(out.join("fig4_adaptation.svg"), chart).map_err(CliError::runtime)?;
    }

    // charts use the smallest capacity (the 10%-style setting)
    let smallest = capacities.keys().next().cloned().unwrap_or_default();
    let tasks: BTreeSet<String> = rows.iter().map(|r| r.task.clone()).collect();
    let task_labels: Vec<String> = tasks.into_iter().collect();
    let policies: BTreeSet<String> = rows.iter().map(|r| r.policy.clone()).collect();

    let composition_series: Vec<Series> = policies
        .iter()
        .map(|policy| Series {
            name: policy.clone(),
            values: task_labels
                .iter()
                .map(|task| {
                    composition_cells
                        .get(&(policy.clone(), smallest.clone(), task.clone()))
                        .map(|(_, normalized)| mean(normalized))
                        .unwrap_or(0.0)
                })
                .collect(),
        })
        .collect();
    std::fs::write(
        out.join("fig1_composition.svg"),
        svg::grouped_bar_chart(
            &format!("Memory composition per task (class-normalized, capacity {smallest})"),
            &task_labels,
            &composition_series,
            "share of memory",
        ),
    )
    .map_err(CliError::runtime)?;

    let capacity_labels: Vec<String> = capacities.keys().cloned().collect();
    let sweep_series: Vec<Series> = policies
        .iter()
        .map(|policy| Series {
            name: policy.clone(),
            values: capacity_labels
                .iter()
                .map(|cap| {
                    sweep_cells
                        .get(&(policy.clone(), cap.clone()))
                        .map(|v| mean(v))
                        .unwrap_or(0.0)
                })
                .collect(),
        })
        .collect();
    std::fs::write(
        out.join("fig2_capacity.svg"),
        svg::line_chart(
            "Final average accuracy vs memory capacity",
            &capacity_labels,
            &sweep_series,
            "accuracy",
        ),
    )
    .map_err(CliError::runtime)?;

    // figure-3 shape: usage and forgetting side by side per task, one pair
    // of series per policy
    let mut fig3_series = Vec::new();
    for policy in &policies {
        fig3_series.push(Series {
            name: format!("{policy} usage"),
            values: task_labels
                .iter()
                .map(|task| {
                    composition_cells
                        .get(&(policy.clone(), smallest.clone(), task.clone()))
                        .map(|(raw, _)| mean(raw))
                        .unwrap_or(0.0)
                })
                .collect(),
        });
        fig3_series.push(Series {
            name: format!("{policy} forgetting"),
            values: task_labels
                .iter()
                .map(|task| {
                    forgetting_cells
                        .get(&(policy.clone(), smallest.clone(), task.clone()))
                        .map(|v| mean(v).max(0.0))
                        .unwrap_or(0.0)
                })
                .collect(),
        });
    }
    std::fs::write(
        out.join("fig3_forgetting_usage.svg"),
        svg::grouped_bar_chart(
            &format!("Memory usage and forgetting per task (capacity {smallest})"),
            &task_labels,
            &fig3_series,
            "fraction",
        ),
    )
    .map_err(CliError::runtime)?;

    outln!("report written to {}", out.display());
    Ok(())
}
