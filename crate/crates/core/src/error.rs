use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("radial positivity violated in block {block}: sqrt(3 tau) p^(-delta/2) = {scale} >= 1")]
    RadialOutOfRange { block: usize, scale: f64 },

    #[error("pole of the inverse map at u = {0}")]
    Pole(Complex64),

    #[error("companion transform did not converge at z = {z} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        z: Complex64,
        iterations: usize,
        residual: f64,
    },

    #[error("quadrature imaginary residue {0:e} exceeds tolerance")]
    ImaginaryResidue(f64),

    #[error("enumeration of {0} outcomes exceeds the cap")]
    EnumerationTooLarge(u64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
