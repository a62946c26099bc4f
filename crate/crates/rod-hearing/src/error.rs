//! Error types shared across the crate.

use thiserror::Error;

/// Library-level failures. Each variant carries enough context to name the
/// failing quantity in diagnostics.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A boundary form was (0, 0); the coefficient matrix would drop below rank 4.
    #[error("boundary form {row} is identically zero (rank of the coefficient matrix < 4)")]
    ZeroRow { row: usize },

    /// Boundary coefficients must be nonnegative.
    #[error("coefficient a{index} = {value} is negative")]
    NegativeCoefficient { index: usize, value: f64 },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A spectrum failed validation (count, positivity, duplicates).
    #[error("bad spectrum: {0}")]
    BadSpectrum(String),

    /// The nine-equation system does not determine a unique direction.
    #[error("rank-deficient system: rank {rank} < 9 (singular values {singular_values:?})")]
    RankDeficient {
        rank: usize,
        singular_values: [f64; 10],
    },

    /// The root scan hit its ceiling before finding the requested count.
    #[error("found only {found} of {requested} eigenvalues below the scan ceiling beta = {beta_ceiling}")]
    ScanExhausted {
        found: usize,
        requested: usize,
        beta_ceiling: f64,
    },

    /// No candidate configuration reproduces the data within tolerance.
    #[error("no fastening configuration fits: best residual {best_residual:.3e} exceeds tolerance {fit_tol:.3e}")]
    NoFit { best_residual: f64, fit_tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
