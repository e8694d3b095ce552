use std::io;

use thiserror::Error;

/// Errors raised by the style-statistics toolkit.
#[derive(Debug, Error)]
pub enum UstError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {gap:e}")]
    SymmetryViolation { row: usize, col: usize, gap: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("matrix is not positive semi-definite: eigenvalue {eigenvalue:e} below tolerance {threshold:e}")]
    NotPsd { eigenvalue: f64, threshold: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("duplicate label `{0}`")]
    LabelCollision(String),

    #[error("distance between `{a}` and `{b}` failed: {source}")]
    Pair {
        a: String,
        b: String,
        #[source]
        source: Box<UstError>,
    },

    #[error("label `{0}` not found")]
    NotFound(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl UstError {
    /// True for failures of the numerical routines themselves (as opposed to
    /// bad input data or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            UstError::NumericalFailure(_)
            | UstError::NotPsd { .. }
            | UstError::DegenerateModel(_) => true,
            UstError::Pair { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = UstError> = std::result::Result<T, E>;
