//! Process-level error taxonomy mapped to exit codes: 2 for configuration
//! problems, 3 for data problems, 4 for numerical or oracle failures.

use std::fmt;

use ivbound_core::Error as CoreError;

#[derive(Debug)]
pub enum AppError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl AppError {
    pub fn code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) => 3,
            AppError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration error: {m}"),
            AppError::Data(m) => write!(f, "data error: {m}"),
            AppError::Numeric(m) => write!(f, "numerical error: {m}"),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;

/// Classifies a library error by which stage of the pipeline it belongs to.
pub fn classify(e: CoreError) -> AppError {
    match e {
        CoreError::InvalidDataset(_)
        | CoreError::SingularDesign
        | CoreError::IrrelevantInstrument { .. }
        | CoreError::DegenerateResidualCovariance => AppError::Data(e.to_string()),
        CoreError::InvalidRestrictions(_)
        | CoreError::RestrictionInconsistentWithR2 { .. }
        | CoreError::InconsistentAuxiliaryEstimates { .. }
        | CoreError::InvalidArgument(_) => AppError::Config(e.to_string()),
        other => AppError::Numeric(other.to_string()),
    }
}
