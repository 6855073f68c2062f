use thiserror::Error;

/// Errors raised for malformed inputs. A family that is well-formed but fails
/// a physicality check is not an error: that outcome is carried by a
/// [`ValidationReport`](crate::report::ValidationReport).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("factor label `{0}` appears more than once")]
    DuplicateLabel(String),

    #[error("unknown factor label `{0}`")]
    UnknownLabel(String),

    #[error("factor dimension must be positive (label `{0}`)")]
    ZeroDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("conditioning event has zero probability in slice {0}")]
    ZeroProbability(String),

    #[error("enumeration cap exceeded: {strategies} strategies requested, cap is {cap}")]
    EnumerationCap { strategies: u128, cap: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
