use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
///
/// Variants under the `Data` umbrella concern reading and preparing input
/// tables; everything else concerns modelling or the experiment protocol.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("unparseable row at line {line}: {message}")]
    ParseRow { line: u64, message: String },

    #[error("target column '{0}' not found in header")]
    TargetMissing(String),

    #[error("zero rows remain after removing rows with missing values")]
    ZeroRows,

    #[error("target column '{0}' is not numeric")]
    TargetNotNumeric(String),

    #[error("all feature columns were dropped during preprocessing")]
    NoFeatures,

    #[error("degenerate target: zero variance")]
    DegenerateTarget,

    #[error("non-invertible value {value} for lambda {lambda}")]
    NonInvertible { value: f64, lambda: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("no records match: {0}")]
    NoMatchingRecords(String),
}

impl Error {
    /// True for errors attributable to the input dataset (the CLI maps these
    /// to their own exit code).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::ParseRow { .. }
                | Error::TargetMissing(_)
                | Error::ZeroRows
                | Error::TargetNotNumeric(_)
                | Error::NoFeatures
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
