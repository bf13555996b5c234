use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid loss matrix or risk parameters: {0}")]
    InvalidRiskSpec(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    /// A numerically impossible state: runaway rejection loops, non-SPD
    /// matrices after jitter, non-finite inputs.
    #[error("numeric abort: {0}")]
    NumericAbort(String),

    /// A brute-force routine was asked for a problem outside its tractable size.
    #[error("tractability guard: {0}")]
    Guard(String),

    #[error("hard condition failure: {0}")]
    ConditionFailure(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
