use thiserror::Error;

/// Errors produced by field, particle and planner operations.
#[derive(Debug, Error)]
pub enum FieldError {
    #[error("intensity must be finite and >= 0, got {0}")]
    NegativeIntensity(f64),
    #[error("area must be finite and >= 0, got {0}")]
    NegativeArea(f64),
    #[error("sensor error-region area must be > 0, got {0}")]
    InvalidErrorArea(f64),
    #[error("grid refinement factor must be >= 1")]
    ZeroRefineFactor,
    #[error("grid dimensions and cell size must be positive")]
    InvalidGrid,
    #[error("cell index {cell} outside grid of {len} cells")]
    CellOutOfGrid { cell: usize, len: usize },
    #[error("path traversal times must be non-decreasing (step {0})")]
    UnorderedPath(usize),
    #[error("obstacle intensity {obstacle} exceeds cell expectation {cell}")]
    IntensityExceedsCell { obstacle: f64, cell: f64 },
    #[error("concentration {kappa} below usable minimum {min}")]
    ConcentrationTooLow { kappa: f64, min: f64 },
}

pub type Result<T> = std::result::Result<T, FieldError>;
