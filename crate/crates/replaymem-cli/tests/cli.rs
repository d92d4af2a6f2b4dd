//! End-to-end tests of the binary: determinism, sweep cross-products,
//! report shapes and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_replaymem"))
}

fn run_ok(args: &[&str]) -> Output {
    let output = bin().args(args).output().expect("binary runs");
    assert!(
        output.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// A small two-task corpus plus a config pointing at it.
fn small_setup(dir: &Path) -> std::path::PathBuf {
    let spec = serde_json::json!({
        "vocab_size": 200,
        "tasks": 2,
        "classes_per_task": 2,
        "train_per_task": 96,
        "test_per_task": 24,
        "tokens_per_example": 8,
        "alpha": 0.8,
        "drift": true,
        "seed": 5
    });
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, spec.to_string()).unwrap();
    run_ok(&[
        "gen-data",
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);

    let config_path = dir.join("config.example.json");
    let mut config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&config_path).unwrap()).unwrap();
    config["batch_size"] = 8.into();
    config["replay_every"] = 4.into();
    config["learner"]["feature_dim"] = 64.into();
    let small = dir.join("config.json");
    std::fs::write(&small, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    small
}

#[test]
fn run_twice_produces_identical_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_setup(dir.path());
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn sweep_emits_the_full_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_setup(dir.path());
    let out = dir.path().join("sweep");
    run_ok(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--capacities",
        "0.1,0.2,0.3,0.4",
        "--seeds",
        "5",
        "--policies",
        "reservoir,naive_random",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut runs = std::collections::BTreeSet::new();
    let mut rows = 0usize;
    for line in text.lines().skip(1) {
        runs.insert(line.split(',').next().unwrap().to_string());
        rows += 1;
    }
    // 4 capacities x 2 policies x 5 seeds
    assert_eq!(runs.len(), 40);
    // times 2 tasks x 2 checkpoints per run
    assert_eq!(rows, 40 * 2 * 2);
    assert!(out.join("runtimes.csv").exists());
}

#[test]
fn sweep_respects_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_setup(dir.path());
    let out = dir.path().join("sweep");
    let output = bin()
        .env("REPLAYMEM_THREADS", "1")
        .args([
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--capacities",
            "0.2",
            "--seeds",
            "2",
            "--policies",
            "reservoir",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());

    let bad = bin()
        .env("REPLAYMEM_THREADS", "zero")
        .args([
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--capacities",
            "0.2",
            "--seeds",
            "1",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn report_builds_summary_grid_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_setup(dir.path());
    let sweep_out = dir.path().join("sweep");
    run_ok(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--capacities",
        "0.2",
        "--seeds",
        "3",
        "--policies",
        "reservoir,surprise,mof",
        "--orders",
        "all",
        "--out",
        sweep_out.to_str().unwrap(),
    ]);
    let report_out = dir.path().join("report");
    run_ok(&[
        "report",
        "--in",
        sweep_out.to_str().unwrap(),
        "--out",
        report_out.to_str().unwrap(),
    ]);

    let summary = std::fs::read_to_string(report_out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "order,policy,mean,std");
    // 4 orders x 3 policies plus one avg. row per policy
    assert_eq!(lines.len() - 1, 4 * 3 + 3);
    let avg_rows = lines.iter().filter(|l| l.starts_with("avg.")).count();
    assert_eq!(avg_rows, 3);

    for chart in [
        "fig1_composition.svg",
        "fig2_capacity.svg",
        "fig3_forgetting_usage.svg",
    ] {
        let svg = std::fs::read_to_string(report_out.join(chart)).unwrap();
        assert!(svg.starts_with("<svg"), "{chart} is not an SVG");
    }
    assert!(report_out.join("composition.csv").exists());
    assert!(report_out.join("forgetting_usage.csv").exists());
    assert!(report_out.join("sweep.csv").exists());
}

#[test]
fn adaptation_runs_produce_fig4() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_setup(dir.path());
    let mut parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    parsed["local_adaptation"] = serde_json::json!({
        "k": 4, "steps": 2, "reg": 1e-3, "adapt_lr": 1e-2
    });
    let adapted = dir.path().join("adapted.json");
    std::fs::write(&adapted, parsed.to_string()).unwrap();

    let metrics_dir = dir.path().join("runs");
    std::fs::create_dir_all(&metrics_dir).unwrap();
    run_ok(&[
        "run",
        "--config",
        adapted.to_str().unwrap(),
        "--out",
        metrics_dir.join("metrics.csv").to_str().unwrap(),
    ]);
    let report_out = dir.path().join("report");
    run_ok(&[
        "report",
        "--in",
        metrics_dir.to_str().unwrap(),
        "--out",
        report_out.to_str().unwrap(),
    ]);
    assert!(report_out.join("adaptation.csv").exists());
    assert!(report_out.join("fig4_adaptation.svg").exists());

    let rows = std::fs::read_to_string(metrics_dir.join("metrics.csv")).unwrap();
    assert!(rows.lines().any(|l| l.contains(",adapted,")));
}

#[test]
fn print_config_shows_all_defaults() {
    let output = run_ok(&["report", "--print-config"]);
    let text = String::from_utf8(output.stdout).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["capacity_fraction"], 0.1);
    assert_eq!(parsed["replay_every"], 100);
    assert_eq!(parsed["batch_size"], 32);
    assert_eq!(parsed["policy"], "reservoir");
}

#[test]
fn exit_codes_follow_the_contract() {
    // unknown flag -> 1 with usage text
    let output = bin().args(["run", "--bogus"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--config"));

    // missing config file -> 1
    let output = bin()
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));

    // config whose capacity floors to zero -> 1 (configuration error)
    let dir = tempfile::tempdir().unwrap();
    let config = small_setup(dir.path());
    let mut parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    parsed["capacity_fraction"] = 1e-9.into();
    let tiny = dir.path().join("tiny.json");
    std::fs::write(&tiny, parsed.to_string()).unwrap();
    let output = bin()
        .args(["run", "--config", tiny.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));

    // unwritable output path -> 2 (runtime error)
    let output = bin()
        .args([
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "/nonexistent_dir/metrics.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn gen_data_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({
        "vocab_size": 200, "tasks": 2, "classes_per_task": 2,
        "train_per_task": 20, "test_per_task": 5, "tokens_per_example": 6,
        "alpha": 0.9, "drift": false, "seed": 3
    });
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec.to_string()).unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(&[
            "gen-data",
            "--spec",
            spec_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    // manifests.json embeds the output paths, so compare everything else
    for name in ["task0.jsonl", "task1.jsonl", "orders.json"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}
