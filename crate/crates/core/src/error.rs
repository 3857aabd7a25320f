//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural mismatch (matrix/vector sizes); always fatal.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix that must be invertible has a condition number above the cap.
    #[error("matrix {name} is near-singular: condition number {cond:.3e} exceeds cap {cap:.3e}")]
    NearSingular {
        name: &'static str,
        cond: f64,
        cap: f64,
    },

    /// A matrix inversion failed outright.
    #[error("matrix {name} is not invertible")]
    Singular { name: &'static str },

    /// An uncertainty realization fell outside the box.
    #[error("uncertainty component {index} = {value} outside box [{lower}, {upper}]")]
    OutOfBox {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Model validation produced at least one failed check.
    #[error("model validation failed:\n{0}")]
    Validation(String),

    /// `kappa_inv` is numerically singular, so the worst-case impact is
    /// unbounded at working precision.
    #[error(
        "impact numerically unbounded: sigma_min(kappa_inv) = {sigma_min:.3e} below {threshold:.3e}"
    )]
    UnboundedImpact { sigma_min: f64, threshold: f64 },

    /// The subset-enumeration cross-check was asked to enumerate too many
    /// index subsets.
    #[error("subset enumeration too large: C({n},{m}) = {count} exceeds {cap}")]
    SubsetGuard {
        n: usize,
        m: usize,
        count: u128,
        cap: u128,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}
