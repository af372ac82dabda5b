use thiserror::Error;

/// Errors raised by the simulation and optimization routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {context} ({left:?} vs {right:?})")]
    DimensionMismatch {
        context: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite entry produced by {0}")]
    NonFinite(&'static str),

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate})")]
    NonConvergence {
        iterations: usize,
        last_estimate: f64,
    },

    #[error("invalid macro-pixel layout: {0}")]
    InvalidControl(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid baseline mode: {0}")]
    InvalidMode(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("coupling kernel disagrees with the direct amplitude chain (relative error {0:e})")]
    KernelMismatch(f64),

    #[error("optimizer failed: all {} restarts produced non-finite objectives", traces.len())]
    OptimizerFailure { traces: Vec<Vec<f64>> },

    #[error("malformed matrix dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
