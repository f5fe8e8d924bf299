use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice box: {0}")]
    InvalidBox(String),

    #[error("lattice box mismatch: {left} vs {right}")]
    BoxMismatch { left: String, right: String },

    #[error("axis {axis} out of range for dimension {d}")]
    AxisOutOfRange { axis: usize, d: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("picard iteration did not converge after {iters} iterates (last sup C_m = {last:e})")]
    PicardNonConvergence { iters: usize, last: f64, history: Vec<f64> },

    #[error("blow-up at t = {t}: sup|u| = {sup_u:e}, sup|u_t| = {sup_ut:e}")]
    BlowUp { t: f64, sup_u: f64, sup_ut: f64 },

    #[error("snapshot parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
