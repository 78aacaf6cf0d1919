use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {what} (expected {expected}, got {got})")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error(
        "fixed-point iteration did not converge on slab {slab} after {iterations} iterations \
         (last increment {increment:.3e}, tau*beta/delta = {margin:.4})"
    )]
    NonConvergence {
        slab: usize,
        iterations: usize,
        increment: f64,
        margin: f64,
    },

    #[error("time step too large for the fixed-point solver: tau*beta/delta = {margin:.4} >= 2")]
    ContractionRefused { margin: f64 },

    #[error("line search failed at iteration {iteration}: step {step:.3e} below 1e-14")]
    LineSearchFailure { iteration: usize, step: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),
}

impl Error {
    /// True for failures of the state/adjoint fixed-point machinery, which sweep
    /// drivers record as "not conv." rows instead of aborting.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::ContractionRefused { .. }
        )
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
