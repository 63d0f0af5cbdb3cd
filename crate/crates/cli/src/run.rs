//! Experiment drivers behind the subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use log::info;
use nnolab_core::neuralop::{budget_pairs, NnoModel};
use nnolab_core::pde::{generate_dataset, Dataset, Task, TaskParams};
use nnolab_core::train::{
    evaluate, fit, fourier_truncation_baseline, EvalReport, HistoryRow, Normalizer,
};
use nnolab_core::universality::{run_suite, SuiteConfig, SuiteReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::nock::{self, Checkpoint};
use crate::nods;
use crate::results::{self, append_rows, completed_cells, read_rows, ResultRow, RESULTS_CSV};
use crate::svg::ucurve_svg;

pub const DATA_FILE: &str = "data.nods";
pub const CELLS_DIR: &str = "cells";
pub const UCURVE_SVG: &str = "ucurve.svg";
pub const CHECKPOINT: &str = "model.nock";
pub const HISTORY_CSV: &str = "history.csv";
pub const BASELINE_CSV: &str = "baseline.csv";

/// Generates `n` samples and writes them with their sidecar.
pub fn gen_data(
    task: Task,
    grid: usize,
    n: usize,
    seed: u64,
    params: &TaskParams,
    out: &Path,
) -> Result<Dataset> {
    let g = task.grid(grid)?;
    let ds = generate_dataset(task, &g, n, seed, params)?;
    nods::save(&ds, out)?;
    Ok(ds)
}

/// The configured dataset, read from the run directory when a file with
/// matching provenance is already there.
pub fn dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let path = cfg.output_dir.join(DATA_FILE);
    let n = cfg.data.n_train + cfg.data.n_test;
    let params = cfg.params();
    if path.exists() {
        match nods::load(&path) {
            Ok(ds)
                if ds.meta.task == cfg.task
                    && ds.meta.seed == cfg.data.seed
                    && ds.meta.params == params
                    && ds.len() == n
                    && ds.grid().nx() == cfg.grid =>
            {
                info!("reusing {}", path.display());
                return Ok(ds);
            }
            Ok(_) => info!("{} has different provenance; regenerating", path.display()),
            Err(e) => info!("ignoring unreadable {}: {e:#}", path.display()),
        }
    }
    let t = Instant::now();
    let ds = gen_data(cfg.task, cfg.grid, n, cfg.data.seed, &params, &path)?;
    info!(
        "generated {n} {} samples in {:.1}s",
        cfg.task,
        t.elapsed().as_secs_f64()
    );
    Ok(ds)
}

pub fn split(cfg: &ExperimentConfig, ds: &Dataset) -> Result<(Dataset, Dataset)> {
    Ok(ds.split(cfg.data.n_test, cfg.data.seed)?)
}

pub fn normalizer(cfg: &ExperimentConfig, train: &Dataset) -> Normalizer {
    if cfg.normalize() {
        Normalizer::fit(train)
    } else {
        Normalizer::identity(train.grid(), train.in_channels(), train.out_channels())
    }
}

/// One `(C, d_c, K, seed)` entry of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub c: usize,
    pub d_c: usize,
    pub k: usize,
    pub seed: u64,
}

impl Cell {
    fn key(&self, task: Task) -> results::CellKey {
        (task.name().to_owned(), self.c, self.k, self.seed)
    }

    fn file_name(&self, task: Task) -> String {
        format!("{}_C{}_K{}_s{}.csv", task.name(), self.c, self.k, self.seed)
    }
}

/// Budgets in order, admissible `(d_c, K)` pairs filtered by `K_list`, then seeds.
pub fn sweep_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &c in &cfg.sweep.c_list {
        for (d_c, k) in budget_pairs(c) {
            if !cfg.sweep.k_list.is_empty() && !cfg.sweep.k_list.contains(&k) {
                continue;
            }
            for &seed in &cfg.seeds {
                cells.push(Cell { c, d_c, k, seed });
            }
        }
    }
    cells
}

pub fn run_cell(
    cfg: &ExperimentConfig,
    cell: Cell,
    train: &Dataset,
    test: &Dataset,
    nz: &Normalizer,
) -> Result<ResultRow> {
    let config = cfg
        .model
        .at_budget(train.in_channels(), train.out_channels(), cell.d_c, cell.k);
    let t = Instant::now();
    let init = NnoModel::init(&config, cell.seed)?;
    let train_cfg = nnolab_core::train::TrainConfig {
        seed: cell.seed,
        ..cfg.train.clone()
    };
    let (model, _) = fit(&init, train, None, &train_cfg, nz)
        .with_context(|| format!("training C={} K={} seed={}", cell.c, cell.k, cell.seed))?;
    let row = ResultRow {
        task: cfg.task.name().to_owned(),
        c: cell.c,
        d_c: cell.d_c,
        k: cell.k,
        seed: cell.seed,
        n_train: train.len(),
        n_test: test.len(),
        param_count: model.param_count(),
        train_err: evaluate(&model, train, nz)?.mean,
        test_err: evaluate(&model, test, nz)?.mean,
        baseline_trunc_err: fourier_truncation_baseline(test, cell.k, None)?,
        wallclock_s: t.elapsed().as_secs_f64(),
    };
    info!(
        "C={} d_c={} K={} seed={}: train {:.4} test {:.4} ({:.0}s)",
        row.c, row.d_c, row.k, row.seed, row.train_err, row.test_err, row.wallclock_s
    );
    Ok(row)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Re-run cells that already have a row.
    pub force: bool,
    /// Cells trained concurrently; sequential when 0 or 1.
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub added: Vec<ResultRow>,
    pub skipped: usize,
    pub csv: PathBuf,
    pub svg: PathBuf,
}

/// Moves rows left in per-cell files by an interrupted parallel run into
/// `results.csv`, in sweep order.
fn merge_cell_files(cfg: &ExperimentConfig, cells: &[Cell], csv: &Path) -> Result<usize> {
    let dir = cfg.output_dir.join(CELLS_DIR);
    if !dir.exists() {
        return Ok(0);
    }
    let done = completed_cells(csv)?;
    let mut merged = 0;
    for cell in cells {
        let p = dir.join(cell.file_name(cfg.task));
        if !p.exists() {
            continue;
        }
        let rows: Vec<ResultRow> = read_rows(&p)?
            .into_iter()
            .filter(|r| !done.contains(&r.key()))
            .collect();
        append_rows(csv, &rows)?;
        merged += rows.len();
        std::fs::remove_file(&p)?;
    }
    if std::fs::read_dir(&dir)?.next().is_none() {
        std::fs::remove_dir(&dir)?;
    }
    Ok(merged)
}

fn drop_cells(csv: &Path, cells: &[Cell], task: Task) -> Result<()> {
    if !csv.exists() {
        return Ok(());
    }
    let keys: std::collections::HashSet<_> = cells.iter().map(|c| c.key(task)).collect();
    let keep: Vec<ResultRow> = read_rows(csv)?
        .into_iter()
        .filter(|r| !keys.contains(&r.key()))
        .collect();
    let tmp = csv.with_extension("csv.tmp");
    if tmp.exists() {
        std::fs::remove_file(&tmp)?;
    }
    append_rows(&tmp, &keep)?;
    std::fs::rename(&tmp, csv)?;
    Ok(())
}

pub fn sweep(cfg: &ExperimentConfig, opts: SweepOptions) -> Result<SweepReport> {
    cfg.validate()?;
    cfg.write_resolved()?;
    let csv = cfg.output_dir.join(RESULTS_CSV);
    let cells = sweep_cells(cfg);
    merge_cell_files(cfg, &cells, &csv)?;
    if opts.force {
        drop_cells(&csv, &cells, cfg.task)?;
    }
    let done = completed_cells(&csv)?;
    let todo: Vec<Cell> = cells
        .iter()
        .copied()
        .filter(|c| !done.contains(&c.key(cfg.task)))
        .collect();
    let skipped = cells.len() - todo.len();
    info!("{} cells to run, {skipped} already complete", todo.len());

    let mut added = Vec::new();
    if !todo.is_empty() {
        let ds = dataset(cfg)?;
        let (train, test) = split(cfg, &ds)?;
        let nz = normalizer(cfg, &train);
        if opts.jobs <= 1 {
            for &cell in &todo {
                let row = run_cell(cfg, cell, &train, &test, &nz)?;
                append_rows(&csv, std::slice::from_ref(&row))?;
                added.push(row);
            }
        } else {
            let dir = cfg.output_dir.join(CELLS_DIR);
            std::fs::create_dir_all(&dir)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.jobs)
                .build()?;
            let outcome: Vec<Result<ResultRow>> = pool.install(|| {
                todo.par_iter()
                    .map(|&cell| {
                        let row = run_cell(cfg, cell, &train, &test, &nz)?;
                        append_rows(
                            &dir.join(cell.file_name(cfg.task)),
                            std::slice::from_ref(&row),
                        )?;
                        Ok(row)
                    })
                    .collect()
            });
            merge_cell_files(cfg, &cells, &csv)?;
            for r in outcome {
                added.push(r?);
            }
        }
    }

    let rows: Vec<ResultRow> = read_rows(&csv)?
        .into_iter()
        .filter(|r| r.task == cfg.task.name())
        .collect();
    let svg = cfg.output_dir.join(UCURVE_SVG);
    let title = format!(
        "{} {}x{}: test error vs K at fixed d_c K",
        cfg.task, cfg.grid, cfg.grid
    );
    std::fs::write(&svg, ucurve_svg(&title, &rows))?;
    Ok(SweepReport {
        added,
        skipped,
        csv,
        svg,
    })
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub row: ResultRow,
    pub history: Vec<HistoryRow>,
    pub checkpoint: PathBuf,
}

/// Trains the configured model once with the first seed, saving a
/// checkpoint and the loss history.
pub fn train_single(cfg: &ExperimentConfig) -> Result<TrainReport> {
    cfg.validate()?;
    cfg.write_resolved()?;
    let ds = dataset(cfg)?;
    let (train, test) = split(cfg, &ds)?;
    let nz = normalizer(cfg, &train);
    let seed = cfg.seeds[0];
    let config = cfg.model.network(train.in_channels(), train.out_channels());
    let t = Instant::now();
    let init = NnoModel::init(&config, seed)?;
    let train_cfg = nnolab_core::train::TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let (model, history) = fit(&init, &train, Some(&test), &train_cfg, &nz)?;
    let k = config.basis.modes().unwrap_or(0);
    let row = ResultRow {
        task: cfg.task.name().to_owned(),
        c: config.d_c * k.max(1),
        d_c: config.d_c,
        k,
        seed,
        n_train: train.len(),
        n_test: test.len(),
        param_count: model.param_count(),
        train_err: evaluate(&model, &train, &nz)?.mean,
        test_err: evaluate(&model, &test, &nz)?.mean,
        baseline_trunc_err: fourier_truncation_baseline(&test, k, None)?,
        wallclock_s: t.elapsed().as_secs_f64(),
    };
    let checkpoint = cfg.output_dir.join(CHECKPOINT);
    nock::save(
        &Checkpoint {
            model,
            normalizer: nz,
        },
        &checkpoint,
    )?;
    write_history(&cfg.output_dir.join(HISTORY_CSV), &history)?;
    append_rows(
        &cfg.output_dir.join(RESULTS_CSV),
        std::slice::from_ref(&row),
    )?;
    Ok(TrainReport {
        row,
        history,
        checkpoint,
    })
}

pub fn write_history(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "lr", "train_mse", "test_rel_l2"])?;
    for h in history {
        w.write_record([
            h.epoch.to_string(),
            results::format_f64(h.lr),
            results::format_f64(h.train_mse),
            h.test_rel_l2.map(results::format_f64).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn eval_checkpoint(checkpoint: &Path, data: &Path) -> Result<EvalReport> {
    let ck = nock::load(checkpoint)?;
    let ds = nods::load(data)?;
    Ok(evaluate(&ck.model, &ds, &ck.normalizer)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub task: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub trunc_err: f64,
    pub trunc_err_normalized: f64,
}

/// Admissible cutoffs `1, 2, 4, ...` below the Nyquist limit of `n`.
pub fn default_cutoffs(n: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|&k| k < n / 2)
        .collect()
}

/// Fourier-truncation error of the held-out outputs per cutoff, computed on
/// raw outputs and in normalized coordinates.
pub fn normalization_study(cfg: &ExperimentConfig) -> Result<Vec<BaselineRow>> {
    cfg.validate()?;
    cfg.write_resolved()?;
    let ds = dataset(cfg)?;
    let (train, test) = split(cfg, &ds)?;
    let nz = Normalizer::fit(&train);
    let ks = if cfg.sweep.k_list.is_empty() {
        default_cutoffs(cfg.grid)
    } else {
        cfg.sweep.k_list.clone()
    };
    let rows = ks
        .into_iter()
        .map(|k| {
            Ok(BaselineRow {
                task: cfg.task.name().to_owned(),
                k,
                trunc_err: fourier_truncation_baseline(&test, k, None)?,
                trunc_err_normalized: fourier_truncation_baseline(&test, k, Some(&nz))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(cfg.output_dir.join(BASELINE_CSV))?;
    w.write_record(["task", "K", "trunc_err", "trunc_err_normalized"])?;
    for r in &rows {
        w.write_record([
            r.task.clone(),
            r.k.to_string(),
            results::format_f64(r.trunc_err),
            results::format_f64(r.trunc_err_normalized),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

pub const UNIVERSALITY_JSON: &str = "universality.json";

/// Runs the averaging-operator suite, writes the report as JSON and appends
/// one results row per width-study model.
pub fn universality(suite: &SuiteConfig, out: &Path) -> Result<SuiteReport> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let report = run_suite(suite)?;
    std::fs::write(
        out.join(UNIVERSALITY_JSON),
        serde_json::to_string_pretty(&report)?,
    )?;
    let rows: Vec<ResultRow> = report
        .widths
        .iter()
        .map(|w| ResultRow {
            task: "shift-ano".into(),
            c: w.d_c,
            d_c: w.d_c,
            k: 0,
            seed: w.seed,
            n_train: w.n_train,
            n_test: w.n_test,
            param_count: w.param_count,
            train_err: w.train_err,
            test_err: w.test_err,
            baseline_trunc_err: w.mean_only_err,
            wallclock_s: w.seconds,
        })
        .collect();
    append_rows(&out.join(RESULTS_CSV), &rows)?;
    Ok(report)
}
