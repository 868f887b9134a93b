use thiserror::Error;

/// Errors raised by the geometric, Monte Carlo and spectral routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("pole lies within tolerance of the path (distance {distance:e})")]
    PoleOnPath { distance: f64 },
    #[error("point {re} + {im}i lies outside the open unit disk")]
    OutsideDisk { re: f64, im: f64 },
    #[error("arc length {length} too long for a representing point (must be < 1/2)")]
    ArcTooLong { length: f64 },
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("point is within tolerance of the boundary")]
    Boundary,
    #[error("boundary is not simple: segments {first} and {second} intersect")]
    NotSimple { first: usize, second: usize },
    #[error("Markov tiling fails: {0}")]
    NotMarkov(String),
    #[error("map {letter} is not contracting (scale {scale})")]
    NotExpanding { letter: usize, scale: f64 },
    #[error("adjacency matrix is not primitive")]
    NotMixing,
    #[error("invalid repeller spec: {0}")]
    InvalidSpec(String),
    #[error("word {0} is not admissible")]
    Inadmissible(String),
    #[error("generation {requested} exceeds the verified depth {max}")]
    GenerationTooDeep { requested: usize, max: usize },
    #[error("delta {delta} outside ({lower}, {upper})")]
    DeltaOutOfRange { delta: f64, lower: f64, upper: f64 },
    #[error("basepoint is not strictly inside the boundary")]
    BasepointOutside,
    #[error("walk exceeded {steps} steps")]
    MaxStepsExceeded { steps: usize },
    #[error("disk does not meet the boundary")]
    EmptyIntersection,
    #[error("no boundary arc satisfies the measure window")]
    NotFound,
    #[error("basepoint lies in the closed disk")]
    BasepointSwallowed,
    #[error("no path to the gate: {0}")]
    NoPath(String),
    #[error("disk is ineligible (boundary diameter ratio {ratio} < 1/4)")]
    Ineligible { ratio: f64 },
    #[error("at least 3 scales with positive values are required, got {usable}")]
    TooFewScales { usable: usize },
    #[error("Monte Carlo budget insufficient: {0}")]
    BudgetExceeded(String),
    #[error("no cylinder measure lands in the window")]
    WindowEmpty,
    #[error("need at least {needed} hits, have {have}")]
    InsufficientHits { needed: usize, have: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("output failed: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
