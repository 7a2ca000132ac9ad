use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need more than {k} samples for k-NN, got {n}")]
    InsufficientSamples { n: usize, k: usize },

    #[error("sample {index} has zero k-NN distance (duplicate points)")]
    ZeroDistance { index: usize },

    #[error("acceptance starved: {rejections} consecutive rejections (tau={tau}, w={weight})")]
    Starved {
        rejections: usize,
        tau: f64,
        weight: f64,
    },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Config,
    Numerical,
    Sampling,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 3,
            ErrorCategory::Config => 4,
            ErrorCategory::Numerical => 5,
            ErrorCategory::Sampling => 6,
            ErrorCategory::Io => 7,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::ShapeMismatch { .. } | Error::Format(_) | Error::MissingInput(_) => {
                ErrorCategory::Input
            }
            Error::InvalidConfig(_) | Error::InsufficientSamples { .. } => ErrorCategory::Config,
            Error::NonFinite(_) | Error::ZeroDistance { .. } | Error::Diverged(_) => {
                ErrorCategory::Numerical
            }
            Error::Starved { .. } => ErrorCategory::Sampling,
            Error::Io(_) => ErrorCategory::Io,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
