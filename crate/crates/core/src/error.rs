use thiserror::Error;

/// Errors raised by construction and evaluation routines.
///
/// Anything that merely *degrades* (a linear solve stopping short of its
/// tolerance, a gradient check reporting a large deviation) is reported
/// through return values instead, so callers can decide whether to continue.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty site set")]
    EmptySiteSet,

    #[error("site {index} has non-finite data")]
    NonFiniteSite { index: usize },

    #[error("field config: {0}")]
    InvalidFieldConfig(String),

    #[error("projection config: {0}")]
    InvalidProjectionConfig(String),

    #[error("material model: {0}")]
    InvalidMaterial(String),

    #[error("neighbor count {k} exceeds site count {sites}")]
    NeighborCountExceedsSites { k: usize, sites: usize },

    #[error("grid resolution {0}x{1} must be nonzero in both directions")]
    EmptyGrid(usize, usize),

    #[error("mask resolution {mask:?} does not match grid {grid:?}")]
    MaskResolutionMismatch { mask: (usize, usize), grid: (usize, usize) },

    #[error("mask has no design elements")]
    NoDesignElements,

    #[error("boundary conditions: {0}")]
    InvalidBoundaryConditions(String),

    #[error("design vector: {0}")]
    InvalidDesignVector(String),

    #[error("problem definition: {0}")]
    InvalidProblem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
