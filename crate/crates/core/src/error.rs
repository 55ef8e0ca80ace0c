use thiserror::Error;

/// Errors raised by lattice, operator, spectral and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("domain mismatch: {left} vs {right}")]
    DomainMismatch { left: String, right: String },

    #[error("axis {axis} out of range for a {dim}-dimensional domain")]
    InvalidAxis { axis: usize, dim: usize },

    #[error("shift offset {offset} must satisfy |offset| < {extent}")]
    InvalidOffset { offset: isize, extent: usize },

    #[error("non-finite value at site {site}")]
    NonFinite { site: usize },

    #[error("invalid spectral bounds: need 0 <= b1 < b2, got ({lower}, {upper}]")]
    InvalidBounds { lower: f64, upper: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient matrix is not Hermitian (defect {defect:e})")]
    NonHermitian { defect: f64 },

    #[error("coefficient validation failed: {0}")]
    InvalidCoefficients(String),

    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),

    #[error("dense assembly needs {sites} sites but the cap is {cap}")]
    CapExceeded { sites: usize, cap: usize },

    #[error("operation requires a periodic domain")]
    NotPeriodic,

    #[error("right-hand side is incompatible: mean defect {defect:e} exceeds {tolerance:e}")]
    IncompatibleRhs { defect: f64, tolerance: f64 },

    #[error("Fourier symbol vanishes away from zero frequency (smallest eigenvalue {min_eigenvalue:e})")]
    SingularSymbol { min_eigenvalue: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
