use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} lies on or outside the unit circle")]
    Domain(Complex64),

    #[error("determinant drifted to {det} (|det - 1| = {drift:e})")]
    Degraded { det: f64, drift: f64 },

    #[error("no fundamental-domain representative within {max_words} reductions of {point}")]
    OutOfRange { point: Complex64, max_words: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("mesh construction failed: {0}")]
    Construction(String),

    #[error("factorization failed: zero pivot at row {row} (|d| = {pivot:e})")]
    Factorization { row: usize, pivot: f64 },

    #[error("eigensolver did not converge: {0}")]
    Convergence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("decay fit rejected (r2 = {r2:.4}): {reason}")]
    FitQuality { r2: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
