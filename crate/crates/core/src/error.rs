use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: nx = {nx}, ny = {ny} (need at least 5 nodes per direction)")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: field is {got_nx}x{got_ny}, expected {nx}x{ny}")]
    GridMismatch {
        nx: usize,
        ny: usize,
        got_nx: usize,
        got_ny: usize,
    },

    #[error("{0} must vanish on the boundary ring (clamped field expected)")]
    NotClamped(&'static str),

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("{what}: solver did not converge (relative residual {residual:.3e})")]
    Solver { what: &'static str, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("history underrun: need data back to t = {needed:.6}, oldest snapshot is at t = {available:.6}")]
    HistoryUnderrun { needed: f64, available: f64 },

    #[error("non-uniform push: expected t = {expected:.12}, got t = {got:.12}")]
    NonUniformPush { expected: f64, got: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("format error in {path:?}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("instability detected at t = {t:.6}: E* = {e_star:.6e} exceeds bound {bound:.6e}")]
    Instability { t: f64, e_star: f64, bound: f64 },

    #[error("newton iteration failed: {0}")]
    Newton(String),

    #[error("eigenvalue iteration failed: {0}")]
    Eigen(String),

    #[error("probe failed: {0}")]
    Probe(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
