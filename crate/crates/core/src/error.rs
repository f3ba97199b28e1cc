use thiserror::Error;

use crate::bch::DecodeFailure;

pub type Result<T, E = QgtError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QgtError {
    #[error("field extension degree q = {0} outside supported range 3..=20")]
    FieldDegree(u32),

    #[error("error-correction capability t = {0} unsupported (1 <= t <= 4)")]
    UnsupportedT(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid degree profile: {0}")]
    Profile(String),

    #[error("graph construction failed: {0}")]
    GraphConstruction(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("syndrome decoding failed: {0}")]
    Decode(#[from] DecodeFailure),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("out of regime: {0}")]
    OutOfRegime(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl QgtError {
    /// Errors that mean "no valid design/plan exists here" rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, QgtError::Infeasible(_) | QgtError::OutOfRegime(_))
    }
}
