use thiserror::Error;

use crate::linalg::Matrix;
use crate::matfac::TrajectorySample;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at position {index}")]
    NonFinite { index: usize },

    #[error("SVD did not converge after {sweeps} sweeps on a {}x{} input", .input.rows(), .input.cols())]
    SvdNoConvergence { sweeps: usize, input: Box<Matrix> },

    #[error("resampling failed: target determinant sign not reached in {attempts} attempts")]
    ResampleFailed { attempts: usize },

    #[error("training diverged at iteration {iter}")]
    Diverged { iter: u64, last: Box<TrajectorySample> },

    #[error("CP training diverged at iteration {iter} (last logged mse {last})")]
    CpDiverged { iter: u64, last: f64 },

    #[error("ground-truth generation failed: estimated rank below {target} after {attempts} attempts")]
    GenerationFailed { target: usize, attempts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
