use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at node {node:?}")]
    NonFinite { node: Vec<usize>, value: f64 },

    #[error("point {point:?} lies outside the field box")]
    OutOfDomain { point: Vec<f64> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("box corners are not on grid nodes: {0}")]
    NotAligned(String),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("map is not monotone near t = {t}")]
    NotMonotone { t: f64 },

    #[error("schedule violates r_k <= eps_k at step {step} (r = {r}, eps = {eps})")]
    ScheduleOrder { step: usize, r: f64, eps: f64 },

    #[error("degenerate level t = {t}: corner mass {mass}")]
    DegenerateLevel { t: f64, mass: f64 },

    #[error("corner tracking failed: {0}")]
    TrackFailure(String),

    #[error("point {point:?} lies in the interior of tiles {first} and {second}")]
    TileOverlap { point: [f64; 2], first: usize, second: usize },
}

pub type Result<T> = std::result::Result<T, LabError>;
