use thiserror::Error;

use crate::train::HistoryRow;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("degenerate reference: truth field has zero norm")]
    DegenerateReference,

    #[error("non-real spectrum: imaginary residue {0:e} exceeds 1e-10")]
    NonRealSpectrum(f64),

    #[error("mode cutoff {k} out of range (maximum {max})")]
    ModeOutOfRange { k: usize, max: usize },

    #[error("field is not mean-zero (mean {0:e})")]
    NotMeanZero(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-positive coefficient {value} at cell ({i}, {j})")]
    NonPositiveCoefficient { value: f64, i: usize, j: usize },

    #[error(
        "solver did not converge after {iterations} iterations (relative residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("resonant frequency: {0}; perturb omega and retry")]
    Resonance(String),

    #[error("CFL violation: dt = {dt} exceeds advective limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("vorticity mean drifted to {0:e}")]
    MeanDrift(f64),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("tape: {0}")]
    Tape(String),

    #[error("config: {0}")]
    Config(String),

    #[error("non-finite gradient in parameter tensor {param} (entry {entry})")]
    NonFiniteGradient { param: usize, entry: usize },

    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    Divergence {
        epoch: usize,
        loss: f64,
        history: Vec<HistoryRow>,
    },
}

impl Error {
    pub(crate) fn at_sample(self, index: usize) -> Self {
        Error::Sample {
            index,
            source: Box::new(self),
        }
    }
}
