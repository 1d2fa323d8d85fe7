use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("all weights are zero at unit {unit:?}, time {time}")]
    DegenerateWeights { unit: Option<usize>, time: usize },

    #[error("innovation covariance is singular at time {time}")]
    SingularInnovation { time: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("profile is not concave near its maximum")]
    UnboundedInterval,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
