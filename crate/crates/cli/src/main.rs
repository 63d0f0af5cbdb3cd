use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use nnolab_cli::config::ExperimentConfig;
use nnolab_cli::run::{self, SweepOptions};
use nnolab_cli::{solver_failure, EXIT_SOLVER_FAILURE};
use nnolab_core::pde::{Task, TaskParams};

#[derive(Parser)]
#[command(
    name = "nnolab",
    version,
    about = "Nonlocal neural operator experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a PDE task on random inputs and write a dataset file.
    GenData {
        #[arg(long)]
        task: Task,
        /// Points per side (a power of two).
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// JSON solver parameters; defaults when omitted.
        #[arg(long)]
        solver: Option<PathBuf>,
    },
    /// Train the configured model once and save a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Mean relative L2 error of a checkpoint on a dataset file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Print per-sample errors too.
        #[arg(long)]
        per_sample: bool,
    },
    /// Train every (d_c, K) split of each budget C for every seed.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Re-run cells that already have results.
        #[arg(long)]
        force: bool,
        /// Cells trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Fourier-truncation error per cutoff, raw and normalized.
    Baseline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Averaging-operator universality experiments.
    Universality {
        /// JSON suite settings; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            task,
            grid,
            n,
            seed,
            out,
            solver,
        } => {
            let params: TaskParams = match solver {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => TaskParams::default(),
            };
            let ds = run::gen_data(task, grid, n, seed, &params, &out)?;
            println!("wrote {} {} samples to {}", ds.len(), task, out.display());
        }
        Command::Train { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let r = run::train_single(&cfg)?;
            println!(
                "train {:.6} test {:.6} baseline {:.6} ({} parameters, {:.1}s); checkpoint {}",
                r.row.train_err,
                r.row.test_err,
                r.row.baseline_trunc_err,
                r.row.param_count,
                r.row.wallclock_s,
                r.checkpoint.display()
            );
        }
        Command::Eval {
            checkpoint,
            data,
            per_sample,
        } => {
            let r = run::eval_checkpoint(&checkpoint, &data)?;
            if per_sample {
                for (i, e) in r.per_sample.iter().enumerate() {
                    println!("{i} {e:.17e}");
                }
            }
            println!("mean relative L2 error {:.17e}", r.mean);
        }
        Command::Sweep {
            config,
            force,
            jobs,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let r = run::sweep(&cfg, SweepOptions { force, jobs })?;
            println!(
                "{} new rows, {} cells skipped; results in {}, plot in {}",
                r.added.len(),
                r.skipped,
                r.csv.display(),
                r.svg.display()
            );
        }
        Command::Baseline { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("K trunc_err trunc_err_normalized");
            for r in run::normalization_study(&cfg)? {
                println!("{} {:.6e} {:.6e}", r.k, r.trunc_err, r.trunc_err_normalized);
            }
        }
        Command::Universality { config, out } => {
            let suite = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => nnolab_core::universality::SuiteConfig::default(),
            };
            let report = run::universality(&suite, &out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(index) = solver_failure(&e) {
                eprintln!("error: solver failed on sample {index}: {e:#}");
                return ExitCode::from(EXIT_SOLVER_FAILURE as u8);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
