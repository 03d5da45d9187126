use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = RegError> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// The CLI maps these onto its exit-code contract through [`RegError::exit_code`].
#[derive(Debug, Error)]
pub enum RegError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("under-determined: {got} correspondences, at least {need} required")]
    UnderDetermined { got: usize, need: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("invalid scale estimate {0} (numerator must be positive)")]
    InvalidScale(f64),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("robustness bound infeasible at step {step}: existence condition fails for theta = {theta:e}")]
    RobustnessInfeasible { step: usize, theta: f64 },

    #[error("insufficient z-levels: {0} level(s), at least 2 required")]
    InsufficientLevels(usize),

    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),

    #[error("invalid depth {0}: must be positive")]
    InvalidDepth(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),
}

impl RegError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RegError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error.
    ///
    /// `2` usage/parse, `3` numerical failure, `4` robustness bound infeasible,
    /// `1` for I/O problems that fit none of those.
    pub fn exit_code(&self) -> i32 {
        match self {
            RegError::Io { .. } => 1,
            RegError::EmptyInput(_)
            | RegError::UnderDetermined { .. }
            | RegError::InsufficientLevels(_)
            | RegError::BehindCamera(_)
            | RegError::InvalidDepth(_)
            | RegError::InvalidArgument(_)
            | RegError::Parse { .. }
            | RegError::Schema(_)
            | RegError::Config(_) => 2,
            RegError::DegenerateInput(_)
            | RegError::DegenerateConfiguration(_)
            | RegError::InvalidScale(_)
            | RegError::NumericalFailure(_) => 3,
            RegError::RobustnessInfeasible { .. } => 4,
        }
    }
}
