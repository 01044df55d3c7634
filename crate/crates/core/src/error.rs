use alloc::string::String;

/// Errors raised by the library. The variants map one-to-one onto the exit
/// codes of the command line tool.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {message} (condition number {condition:.3e})")]
    NumericalFailure { message: String, condition: f64 },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("empty scattering region around ({0:.3}, {1:.3}, {2:.3})")]
    EmptyRegion(f64, f64, f64),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, condition: f64) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            condition,
        }
    }
}
