use thiserror::Error;

/// Failures of a harness run, split by the exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration or arguments; nothing was computed.
    #[error("validation error: {0}")]
    Validation(String),

    /// A computation stopped on a numerical precondition or convergence failure.
    #[error("numerical abort in {stage}: {source}")]
    Numerical {
        stage: String,
        #[source]
        source: speedlimit::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn validation(path: &str, msg: impl std::fmt::Display) -> Self {
        Self::Validation(format!("{path}: {msg}"))
    }

    pub fn numerical(stage: impl Into<String>) -> impl FnOnce(speedlimit::Error) -> Self {
        let stage = stage.into();
        move |source| Self::Numerical { stage, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical { .. } | Self::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Exit code when every check passed or was out of scope.
pub const EXIT_PASS: i32 = 0;
/// Exit code when at least one check failed.
pub const EXIT_VIOLATION: i32 = 1;
