//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by domain construction, rasterization, solves and reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("point {point:?} lies in a region dropped by the resolution policy ({detail})")]
    TruncatedRegion { point: Vec<f64>, detail: String },

    #[error("raster has no inside cells")]
    EmptyRaster,

    #[error("cell {cell:?} is unreachable from the base cell (cell component {component}, base component {base_component})")]
    Unreachable {
        cell: Vec<usize>,
        component: u32,
        base_component: u32,
    },

    #[error("grids are not aligned: {0}")]
    GridMismatch(String),

    #[error("base points disagree: {0}")]
    BaseMismatch(String),

    #[error("tube does not intersect the domain")]
    EmptyTubeIntersection,

    #[error("series has too few terms ({got}); need at least {need}")]
    TooFewTerms { got: usize, need: usize },

    #[error("certificate refused: {0}")]
    CertificateRefused(String),

    #[error("no sign change across the s grid; cannot bracket a threshold")]
    NoThresholdBracket,

    #[error("feature not present at this resolution: {0}")]
    FeatureTruncatedAway(String),

    #[error("weight is not positive on the raster: {0}")]
    BadWeight(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
