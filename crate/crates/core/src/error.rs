use thiserror::Error;

/// Errors produced by the downfolding laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not anti-Hermitian (deviation {0:.3e})")]
    NotAntiHermitian(f64),

    #[error("principal logarithm undefined: eigenvalue {re:.6} + {im:.6}i lies on the branch cut")]
    BranchCut { re: f64, im: f64 },

    #[error("reference coefficient {0:.3e} below the intermediate-normalization threshold")]
    IntermediateNormalization(f64),

    #[error("ordering violation: determinant {determinant:#b} regrew to {magnitude:.3e} after elimination")]
    OrderingViolation { determinant: u32, magnitude: f64 },

    #[error("state is not supported on the complete active space (external weight {0:.3e})")]
    CasSupport(f64),

    #[error("internal signature found where only external excitations are allowed: {0}")]
    InternalSignature(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("norm drift {drift:.3e} at step {step} exceeds the rejection threshold")]
    NormDrift { step: usize, drift: f64 },

    #[error("no convergence after {0} steps")]
    NotConverged(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable kebab-case identifier for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::InvalidInput(_) => "invalid-input",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NonFinite => "non-finite",
            Error::NotUnitary(_) => "not-unitary",
            Error::NotHermitian(_) => "not-hermitian",
            Error::NotAntiHermitian(_) => "not-anti-hermitian",
            Error::BranchCut { .. } => "branch-cut",
            Error::IntermediateNormalization(_) => "intermediate-normalization",
            Error::OrderingViolation { .. } => "ordering-violation",
            Error::CasSupport(_) => "cas-support",
            Error::InternalSignature(_) => "internal-signature",
            Error::Eigensolver(_) => "eigensolver",
            Error::NormDrift { .. } => "norm-drift",
            Error::NotConverged(_) => "not-converged",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
