use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("expectation has imaginary residue {0:e}; observable is not Hermitian")]
    NonHermitianObservable(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupling {0} applied twice")]
    DuplicateCoupling(String),

    #[error("couplings not yet applied: {0}")]
    MissingCoupling(String),

    #[error("grid coverage violated: {0}")]
    Coverage(String),

    #[error("degenerate settings: {0}")]
    Degenerate(String),

    #[error("insufficient counts: need {needed}, have {have}")]
    InsufficientCounts { needed: u64, have: u64 },

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("calibration axis assignment inconsistent: {0}")]
    AxisAssignment(String),

    #[error("malformed tensor file: {0}")]
    Parse(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
