//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = CoreError> = std::result::Result<T, E>;

/// Everything that can go wrong below the CLI layer.
///
/// `Parse` and `Validation` both describe bad input data; the split is that
/// `Parse` means the bytes were malformed while `Validation` means the data
/// was readable but violates an invariant (class id out of range, fewer than
/// two models, budgets exceeding the stream length, and so on).
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CoreError::Validation(msg.into())
    }

    pub fn parse(source_name: &str, line: usize, msg: impl Into<String>) -> Self {
        CoreError::Parse {
            source_name: source_name.to_string(),
            line,
            message: msg.into(),
        }
    }

    /// Prefixes context onto the message-bearing variants without changing
    /// the error's kind. Parse and io errors already carry their own
    /// location and pass through untouched.
    pub fn with_context(self, ctx: impl AsRef<str>) -> Self {
        let ctx = ctx.as_ref();
        match self {
            CoreError::InvalidArgument(m) => CoreError::InvalidArgument(format!("{ctx}: {m}")),
            CoreError::Validation(m) => CoreError::Validation(format!("{ctx}: {m}")),
            other => other,
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    /// The CLI maps these to its usage exit code.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            CoreError::InvalidArgument(_) | CoreError::Parse { .. } | CoreError::Validation(_)
        )
    }
}
