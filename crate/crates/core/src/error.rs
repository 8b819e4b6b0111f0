//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (bad magic, ragged rows, wrong header fields).
    #[error("format error: {0}")]
    Format(String),

    /// Payload shorter or longer than the header declares.
    #[error("length error: {0}")]
    Length(String),

    /// A cell or token that failed to parse as a number.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Requested split cannot be satisfied by the dataset.
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    /// Mini-batch or triplet sampling cannot proceed.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Caller violated an operation contract (shape/length/label range).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Out-of-range configuration parameter.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Non-finite values where finite numbers are required.
    #[error("numeric input error: {0}")]
    Numeric(String),

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: u64, detail: String },

    /// Metric computation impossible (e.g. no query had relevant items).
    #[error("evaluation error: {0}")]
    Evaluation(String),
}
