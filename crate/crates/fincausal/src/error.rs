//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by ingestion, estimation, and pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    #[error("no usable rows after parsing ({dropped} dropped)")]
    NoUsableRows { dropped: usize },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("date intersection of the inputs is empty")]
    EmptyIntersection,

    #[error("span {first}..{last} is shorter than one {length_months}-month window")]
    SpanTooShort {
        first: chrono::NaiveDate,
        last: chrono::NaiveDate,
        length_months: u32,
    },

    #[error("window {index} selects {got} observations, fewer than the minimum {min}")]
    UndersizedSlice { index: usize, got: usize, min: usize },

    #[error("series has zero variance: {0}")]
    ZeroVariance(String),

    #[error("degenerate tail: no observations strictly above the {q}-quantile")]
    DegenerateTail { q: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank-deficient regressor matrix; offending columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("residual covariance matrix is singular")]
    SingularCovariance,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("IRLS did not converge within {max_iter} iterations")]
    NonConvergence { max_iter: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resampling aborted: {failures} of {total} replicates failed (limit {limit:.0}%)")]
    ResampleFailures { failures: usize, total: usize, limit: f64 },

    #[error("generator specification is non-stationary (companion spectral radius {rho:.4})")]
    NonStationary { rho: f64 },

    #[error("instantaneous effect matrix does not describe an acyclic graph")]
    CyclicStructure,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown factor {0:?}")]
    UnknownFactor(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pipeline finished with {failed} failed windows; see manifest")]
    Pipeline { failed: usize },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for CLI front-ends: 1 for configuration/input
    /// problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_)
            | Error::Csv(_)
            | Error::MissingColumn(_)
            | Error::NoUsableRows { .. }
            | Error::InvalidPanel(_)
            | Error::UnknownFactor(_)
            | Error::Config(_) => 1,
            _ => 2,
        }
    }
}
