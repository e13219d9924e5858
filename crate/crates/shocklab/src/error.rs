//! Error type shared by every stage of the laboratory.

use thiserror::Error;

/// All recoverable failures raised by the library.
#[derive(Debug, Error)]
pub enum ShockError {
    /// A grid was requested with too few points or a degenerate extent.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two fields or a field and a grid disagree in shape.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A derivative order outside the supported range.
    #[error("unsupported derivative order {0}")]
    UnsupportedOrder(usize),

    /// Non-finite values were met where finite values are required.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// Snapshot or CSV input that does not follow the expected layout.
    #[error("malformed file: {0}")]
    Malformed(String),

    /// The charge density touches the padding region of the free-space solver.
    #[error("charge density support reaches the grid boundary: {0}")]
    SupportTooLarge(String),

    /// A configuration value is missing, unknown or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Initial data that violates one of the admissibility checks.
    #[error("initial data rejected: {0}")]
    InvalidInitialData(String),

    /// The time step exceeds the stability limit.
    #[error("CFL violation: {0}")]
    Cfl(String),

    /// Non-physical state such as a negative density.
    #[error("non-physical state: {0}")]
    NonPhysical(String),

    /// The modulation constraints could not be solved.
    #[error("modulation failure: {0}")]
    Modulation(String),

    /// A requested sampling region lies outside the available data.
    #[error("region outside grid: {0}")]
    OutOfRange(String),

    /// A fit or estimate whose preconditions are not met.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Two run directories that cannot be compared.
    #[error("incompatible configs: {0}")]
    Incompatible(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, ShockError>;
