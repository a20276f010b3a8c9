use std::path::PathBuf;

use osfde::OsfdeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Solver(#[from] OsfdeError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("assumption violated: {0}")]
    Assumption(String),
}

impl HarnessError {
    /// 0 success, 1 I/O, 2 configuration, 3 solver failure, 4 assumption violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parse { .. } => 2,
            Self::Io { .. } | Self::Json(_) => 1,
            Self::Assumption(_) => 4,
            Self::Solver(e) => match e {
                OsfdeError::GmresDivergence { .. }
                | OsfdeError::InnerSolverDivergence { .. }
                | OsfdeError::NonPositivePivot(_)
                | OsfdeError::Singular { .. }
                | OsfdeError::StabilityViolation { .. } => 3,
                OsfdeError::AssumptionViolated(_) => 4,
                _ => 2,
            },
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::Config("x".into()).exit_code(), 2);
        assert_eq!(HarnessError::Assumption("x".into()).exit_code(), 4);
        let div = OsfdeError::GmresDivergence {
            step: 1,
            iterations: 3,
            residual: 1.0,
        };
        assert_eq!(HarnessError::from(div).exit_code(), 3);
        assert_eq!(HarnessError::from(OsfdeError::InvalidOrder(2.5)).exit_code(), 2);
    }
}
