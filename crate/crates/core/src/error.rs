//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by constructors and operations.
///
/// Variants follow the failure classes of the numerical subsystems rather
/// than the call sites: a `Domain` error means the input data violates a
/// mathematical precondition, a `Config` error means the requested
/// discretization or sweep is inconsistent, and so on.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent discretization / sweep configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Coefficient fails a positivity / ellipticity requirement.
    #[error("ellipticity error: {0}")]
    Ellipticity(String),

    /// A time step violates a stability restriction.
    #[error("stability error: {0}")]
    Stability(String),

    /// A basis is rank-deficient or otherwise unusable.
    #[error("basis error: {0}")]
    Basis(String),

    /// A linear system that should be invertible is numerically singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// A requested evaluation point lies outside the resolved range.
    #[error("range error: {0}")]
    Range(String),

    /// A fit did not meet its tolerance or produced unusable parameters.
    #[error("fit error: {0}")]
    Fit(String),

    /// A convergence study is under-determined.
    #[error("study error: {0}")]
    Study(String),

    /// Text (de)serialization failure.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
