//! Forgetting, composition, usage and summary statistics, plus the CSV
//! schemas the harness emits.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::memory::CompositionReport;

/// Everything measured in one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub run_id: String,
    pub seed: u64,
    pub order: String,
    pub policy: String,
    pub capacity_fraction: f64,
    /// Task names in stream order; indices below refer to this order.
    pub task_names: Vec<String>,
    /// `accuracy[checkpoint][task]`; one checkpoint after each task.
    pub accuracy: Vec<Vec<f64>>,
    /// Final evaluation with local adaptation, when enabled.
    pub adapted_accuracy: Option<Vec<f64>>,
    /// Memory composition snapshot at each checkpoint.
    pub composition: Vec<CompositionReport>,
    pub replay_steps: u64,
    pub replayed_examples: u64,
    pub skipped_replays: u64,
    pub new_batches: u64,
    pub new_examples: u64,
    /// Extremes of the per-example new-data training counts; both must be 1
    /// for a single-pass run.
    pub min_train_visits: u32,
    pub max_train_visits: u32,
    pub memory_len_final: usize,
    pub train_secs: f64,
    pub eval_secs: f64,
    pub adapt_secs: f64,
}

impl ExperimentRecord {
    pub fn num_tasks(&self) -> usize {
        self.task_names.len()
    }

    /// Accuracy of a task right after its own training checkpoint.
    pub fn acc_initial(&self, task: usize) -> f64 {
        self.accuracy[task][task]
    }

    /// Accuracy of a task at the final checkpoint.
    pub fn acc_final(&self, task: usize) -> f64 {
        self.accuracy[self.accuracy.len() - 1][task]
    }

    /// Mean final accuracy over tasks: the headline number of a run.
    pub fn final_avg_accuracy(&self) -> f64 {
        let t = self.num_tasks();
        (0..t).map(|i| self.acc_final(i)).sum::<f64>() / t as f64
    }
}

/// Per-task forgetting under both definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingRecord {
    /// Stream position of the task.
    pub task: usize,
    /// Initial (post-training) accuracy minus final accuracy.
    pub forgetting_final: f64,
    /// Per-checkpoint drops `(checkpoint, acc_prev - acc_curr)` starting
    /// from checkpoint 1.
    pub forgetting_step: Vec<(usize, f64)>,
}

/// Both forgetting variants for every task of a record.
pub fn forgetting(record: &ExperimentRecord) -> Vec<ForgettingRecord> {
    let checkpoints = record.accuracy.len();
    (0..record.num_tasks())
        .map(|task| {
            let steps = (1..checkpoints)
                .map(|c| (c, record.accuracy[c - 1][task] - record.accuracy[c][task]))
                .collect();
            ForgettingRecord {
                task,
                forgetting_final: record.acc_initial(task) - record.acc_final(task),
                forgetting_step: steps,
            }
        })
        .collect()
}

/// One cell of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub order: String,
    pub policy: String,
    pub mean: f64,
    pub std: f64,
}

fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-(order, policy) mean and sample standard deviation of the final
/// average accuracy across seeds, plus an `avg.` row per policy (mean of
/// the per-order means and of the per-order stds). Permutation-invariant in
/// its input.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for record in records {
        cells
            .entry((record.order.clone(), record.policy.clone()))
            .or_default()
            .push(record.final_avg_accuracy());
    }
    let mut rows = Vec::new();
    let mut per_policy: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for ((order, policy), mut values) in cells {
        values.sort_by(f64::total_cmp);
        let (mean, std) = mean_and_sample_std(&values);
        per_policy
            .entry(policy.clone())
            .or_default()
            .push((mean, std));
        rows.push(SummaryRow {
            order,
            policy,
            mean,
            std,
        });
    }
    for (policy, cells) in per_policy {
        let n = cells.len() as f64;
        rows.push(SummaryRow {
            order: "avg.".to_string(),
            policy,
            mean: cells.iter().map(|c| c.0).sum::<f64>() / n,
            std: cells.iter().map(|c| c.1).sum::<f64>() / n,
        });
    }
    rows
}

/// Paired per-task memory usage and forgetting, with their Spearman rank
/// correlation when it is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageForgetting {
    /// `(task, usage fraction, forgetting_final)` per task in stream order.
    pub pairs: Vec<(usize, f64, f64)>,
    /// `None` for fewer than 3 tasks or degenerate (constant) ranks.
    pub spearman: Option<f64>,
}

/// Memory usage (raw final composition) against final forgetting.
pub fn usage_vs_forgetting(record: &ExperimentRecord) -> UsageForgetting {
    let forgetting = forgetting(record);
    let final_composition = record.composition.last();
    let pairs: Vec<(usize, f64, f64)> = forgetting
        .iter()
        .map(|f| {
            let usage = final_composition
                .and_then(|c| c.raw.get(&(f.task as u16)))
                .copied()
                .unwrap_or(0.0);
            (f.task, usage, f.forgetting_final)
        })
        .collect();
    let usage: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let forget: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let spearman = if pairs.len() < 3 {
        None
    } else {
        spearman_rank_correlation(&usage, &forget)
    };
    UsageForgetting { pairs, spearman }
}

/// Average ranks (ties share the mean rank).
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson over average ranks. `None` when either
/// variable has constant ranks.
pub fn spearman_rank_correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx.sqrt() * vy.sqrt()))
}

/// One row of the long-format metrics CSV: a (run, task, checkpoint) cell.
/// The column order of this struct is the file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub order: String,
    pub policy: String,
    pub capacity_fraction: f64,
    pub task: String,
    /// Checkpoint index after each task, or `adapted` for the
    /// local-adaptation evaluation.
    pub checkpoint: String,
    pub accuracy: f64,
    pub forgetting_final: f64,
    /// Empty at checkpoint 0 and on adapted rows.
    pub forgetting_step: Option<f64>,
    pub mem_count: u64,
    pub mem_fraction_raw: f64,
    pub mem_fraction_normalized: f64,
}

/// Flatten a record into CSV rows: every (task, checkpoint) cell, then one
/// `adapted` row per task when local adaptation ran.
pub fn rows_from_record(record: &ExperimentRecord) -> Vec<MetricsRow> {
    let forgetting = forgetting(record);
    let mut rows = Vec::new();
    for (task, name) in record.task_names.iter().enumerate() {
        let f = &forgetting[task];
        for (checkpoint, accs) in record.accuracy.iter().enumerate() {
            let composition = &record.composition[checkpoint];
            let step = if checkpoint == 0 {
                None
            } else {
                Some(f.forgetting_step[checkpoint - 1].1)
            };
            rows.push(MetricsRow {
                run_id: record.run_id.clone(),
                seed: record.seed,
                order: record.order.clone(),
                policy: record.policy.clone(),
                capacity_fraction: record.capacity_fraction,
                task: name.clone(),
                checkpoint: checkpoint.to_string(),
                accuracy: accs[task],
                forgetting_final: f.forgetting_final,
                forgetting_step: step,
                mem_count: composition.counts.get(&(task as u16)).copied().unwrap_or(0) as u64,
                mem_fraction_raw: composition.raw.get(&(task as u16)).copied().unwrap_or(0.0),
                mem_fraction_normalized: composition
                    .normalized
                    .get(&(task as u16))
                    .copied()
                    .unwrap_or(0.0),
            });
        }
        if let Some(adapted) = &record.adapted_accuracy {
            let composition = record.composition.last().expect("at least one checkpoint");
            rows.push(MetricsRow {
                run_id: record.run_id.clone(),
                seed: record.seed,
                order: record.order.clone(),
                policy: record.policy.clone(),
                capacity_fraction: record.capacity_fraction,
                task: name.clone(),
                checkpoint: "adapted".to_string(),
                accuracy: adapted[task],
                forgetting_final: f.forgetting_final,
                forgetting_step: None,
                mem_count: composition.counts.get(&(task as u16)).copied().unwrap_or(0) as u64,
                mem_fraction_raw: composition.raw.get(&(task as u16)).copied().unwrap_or(0.0),
                mem_fraction_normalized: composition
                    .normalized
                    .get(&(task as u16))
                    .copied()
                    .unwrap_or(0.0),
            });
        }
    }
    rows
}

/// Write records as one metrics CSV with a header. Output bytes are a pure
/// function of the records.
pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for record in records {
        for row in rows_from_record(record) {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_csv_string(records: &[ExperimentRecord]) -> String {
    let mut bytes = Vec::new();
    write_records_csv(records, &mut bytes).expect("in-memory write");
    String::from_utf8(bytes).expect("CSV is UTF-8")
}

/// Read rows back from a metrics CSV.
pub fn read_rows_csv<R: std::io::Read>(reader: R) -> csv::Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().collect()
}

/// Final average accuracy per run, recomputed from CSV rows: mean over
/// tasks of the accuracy at the last numeric checkpoint.
pub fn final_accuracy_by_run(rows: &[MetricsRow]) -> BTreeMap<String, f64> {
    let mut last_checkpoint: BTreeMap<&str, u32> = BTreeMap::new();
    for row in rows {
        if let Ok(c) = row.checkpoint.parse::<u32>() {
            let e = last_checkpoint.entry(row.run_id.as_str()).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for row in rows {
        if row.checkpoint.parse::<u32>().ok() == last_checkpoint.get(row.run_id.as_str()).copied() {
            let e = sums.entry(row.run_id.clone()).or_insert((0.0, 0));
            e.0 += row.accuracy;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(run, (sum, n))| (run, sum / n as f64))
        .collect()
}

/// Summary rows recomputed from CSV rows, mirroring [`summarize`].
pub fn summarize_rows(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let finals = final_accuracy_by_run(rows);
    let mut meta: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
    for row in rows {
        meta.entry(row.run_id.as_str())
            .or_insert((row.order.as_str(), row.policy.as_str()));
    }
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (run, value) in &finals {
        let (order, policy) = meta[run.as_str()];
        cells
            .entry((order.to_string(), policy.to_string()))
            .or_default()
            .push(*value);
    }
    let mut rows_out = Vec::new();
    let mut per_policy: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for ((order, policy), mut values) in cells {
        values.sort_by(f64::total_cmp);
        let (mean, std) = mean_and_sample_std(&values);
        per_policy
            .entry(policy.clone())
            .or_default()
            .push((mean, std));
        rows_out.push(SummaryRow {
            order,
            policy,
            mean,
            std,
        });
    }
    for (policy, cells) in per_policy {
        let n = cells.len() as f64;
        rows_out.push(SummaryRow {
            order: "avg.".to_string(),
            policy,
            mean: cells.iter().map(|c| c.0).sum::<f64>() / n,
            std: cells.iter().map(|c| c.1).sum::<f64>() / n,
        });
    }
    rows_out
}

/// Write a summary CSV (`order,policy,mean,std`).
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
