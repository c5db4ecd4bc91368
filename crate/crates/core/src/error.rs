use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid elbow parameter {0} (must lie in [-pi, pi])")]
    ElbowOutOfRange(f64),

    #[error("invalid arm model: {0}")]
    InvalidArm(String),

    #[error("invalid object `{name}`: {reason}")]
    InvalidObject { name: String, reason: String },

    #[error("ill-posed geometry: {0}")]
    Degenerate(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("scenario {trial} infeasible after {attempts} sampling attempts")]
    ScenarioInfeasible { trial: u64, attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
