//! End-to-end behaviour of the `nnolab` binary.

use std::path::Path;
use std::process::{Command, Output};

use nnolab_cli::config::{ExperimentConfig, RESOLVED_CONFIG};
use nnolab_cli::nods;
use nnolab_cli::results::{read_rows, HEADER, RESULTS_CSV};
use nnolab_cli::run::{CHECKPOINT, HISTORY_CSV, UCURVE_SVG};

fn nnolab(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_nnolab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.nods");
    let b = dir.path().join("b.nods");
    for p in [&a, &b] {
        let out = nnolab(&[
            "gen-data",
            "--task",
            "darcy-pc",
            "--grid",
            "16",
            "--n",
            "3",
            "--seed",
            "7",
            "--out",
            path_str(p),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.nods");
    nnolab(&[
        "gen-data",
        "--task",
        "darcy-pc",
        "--grid",
        "16",
        "--n",
        "3",
        "--seed",
        "8",
        "--out",
        path_str(&c),
    ]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn non_power_of_two_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.nods");
    let out = nnolab(&[
        "gen-data",
        "--task",
        "darcy-pc",
        "--grid",
        "63",
        "--n",
        "2",
        "--out",
        path_str(&p),
    ]);
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(2));
    assert!(!p.exists());
}

#[test]
fn dataset_file_survives_load_save_load() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.nods");
    assert!(nnolab(&[
        "gen-data",
        "--task",
        "helmholtz",
        "--grid",
        "16",
        "--n",
        "2",
        "--out",
        path_str(&p)
    ])
    .status
    .success());
    let first = nods::load(&p).unwrap();
    let q = dir.path().join("e.nods");
    nods::save(&first, &q).unwrap();
    let second = nods::load(&q).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
    assert_eq!(first.inputs, second.inputs);
    assert_eq!(first.outputs, second.outputs);
    assert_eq!(first.meta, second.meta);
}

#[test]
fn solver_failure_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let solver = dir.path().join("solver.json");
    std::fs::write(&solver, r#"{"helmholtz_omega": 0.0}"#).unwrap();
    let p = dir.path().join("h.nods");
    let out = nnolab(&[
        "gen-data",
        "--task",
        "helmholtz",
        "--grid",
        "8",
        "--n",
        "2",
        "--out",
        path_str(&p),
        "--solver",
        path_str(&solver),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sample 0"));
}

fn sweep_config(dir: &Path) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "task": "darcy-pc",
            "grid": 64,
            "data": {{"n_train": 6, "n_test": 3, "seed": 1}},
            "model": {{"layers": 2, "lifting_width": 16, "projection_width": 16}},
            "train": {{"epochs": 1, "batch_size": 3, "lr0": 1e-3, "weight_decay": 0.0, "seed": 0, "shuffle": true, "coupled_wd": false}},
            "sweep": {{"C_list": [32], "K_list": [2, 4, 8, 16]}},
            "seeds": [0],
            "output_dir": {:?}
        }}"#,
        dir.to_str().unwrap()
    );
    let cfg = ExperimentConfig::from_json(&text).unwrap();
    std::fs::write(dir.join("config.json"), text).unwrap();
    cfg
}

#[test]
fn sweep_writes_rows_resumes_and_forces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    let config = dir.path().join("config.json");
    assert!(nnolab(&["sweep", "--config", path_str(&config)])
        .status
        .success());

    let csv = dir.path().join(RESULTS_CSV);
    let rows = read_rows(&csv).unwrap();
    assert_eq!(rows.len(), 4);
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.sort();
    assert_eq!(ks, vec![2, 4, 8, 16]);
    for r in &rows {
        assert_eq!((r.task.as_str(), r.c, r.d_c * r.k), ("darcy-pc", 32, 32));
        assert!(r.test_err.is_finite() && r.baseline_trunc_err.is_finite());
    }
    assert!(std::fs::read_to_string(&csv)
        .unwrap()
        .starts_with(&HEADER.join(",")));

    let svg = std::fs::read_to_string(dir.path().join(UCURVE_SVG)).unwrap();
    assert_eq!(svg.matches("<path").count(), 2);
    assert_eq!(svg.matches("stroke-dasharray").count(), 1);

    let resolved: ExperimentConfig =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(RESOLVED_CONFIG)).unwrap())
            .unwrap();
    assert_eq!(resolved, cfg.resolved());
    assert_eq!(resolved.data.normalize, Some(true));

    let before = std::fs::read(&csv).unwrap();
    let out = nnolab(&["sweep", "--config", path_str(&config)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 new rows, 4 cells skipped"));
    assert_eq!(std::fs::read(&csv).unwrap(), before);

    assert!(nnolab(&[
        "sweep",
        "--config",
        path_str(&config),
        "--force",
        "--jobs",
        "2"
    ])
    .status
    .success());
    let again = read_rows(&csv).unwrap();
    assert_eq!(again.len(), 4);
    // Same seeds and data: the retrained errors are reproduced exactly.
    for r in &rows {
        let s = again.iter().find(|a| a.key() == r.key()).unwrap();
        assert_eq!(s.test_err, r.test_err);
    }
}

#[test]
fn train_then_eval_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sweep_config(dir.path());
    cfg.grid = 16;
    cfg.train.epochs = 2;
    let config = dir.path().join("train.json");
    std::fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert!(nnolab(&["train", "--config", path_str(&config)])
        .status
        .success());
    let history = std::fs::read_to_string(dir.path().join(HISTORY_CSV)).unwrap();
    assert_eq!(history.lines().count(), 3);
    let rows = read_rows(&dir.path().join(RESULTS_CSV)).unwrap();
    assert_eq!(rows.len(), 1);

    let data = dir.path().join("eval.nods");
    nnolab(&[
        "gen-data",
        "--task",
        "darcy-pc",
        "--grid",
        "16",
        "--n",
        "3",
        "--seed",
        "9",
        "--out",
        path_str(&data),
    ]);
    let out = nnolab(&[
        "eval",
        "--checkpoint",
        path_str(&dir.path().join(CHECKPOINT)),
        "--data",
        path_str(&data),
        "--per-sample",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 4);
    let mean: f64 = lines[3].rsplit(' ').next().unwrap().parse().unwrap();
    let per: Vec<f64> = lines[..3]
        .iter()
        .map(|l| l.split(' ').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((mean - per.iter().sum::<f64>() / 3.0).abs() <= 1e-12 * mean.abs());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"task": "darcy-pc", "gird": 32}"#).unwrap();
    let out = nnolab(&["train", "--config", path_str(&config)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gird"));
}
