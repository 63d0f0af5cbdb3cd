//! Command-line experiments over `nnolab-core`: dataset and checkpoint
//! files, budget sweeps, results tables and plots.

pub mod config;
pub mod nock;
pub mod nods;
pub mod results;
pub mod run;
pub mod svg;

pub use config::ExperimentConfig;
pub use results::ResultRow;

/// Exit status for a failed PDE solve during data generation.
pub const EXIT_SOLVER_FAILURE: i32 = 2;

/// The sample index of a solver failure anywhere in `err`'s chain.
pub fn solver_failure(err: &anyhow::Error) -> Option<usize> {
    err.chain()
        .find_map(|e| match e.downcast_ref::<nnolab_core::Error>() {
            Some(nnolab_core::Error::Sample { index, .. }) => Some(*index),
            _ => None,
        })
}
