use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {got} is too small, need at least {min}")]
    TooSmall {
        what: &'static str,
        got: usize,
        min: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid manifold: {0}")]
    InvalidManifold(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("patch map is not an isometry: {0}")]
    NotIsometric(String),
    #[error("regions overlap")]
    OverlappingRegions,
    #[error("manifold has an empty boundary")]
    EmptyBoundary,
    #[error("eigensolver residual {residual:e} exceeds tolerance {tolerance:e}")]
    EigenResidual { residual: f64, tolerance: f64 },
    #[error("function is undefined at eigenvalue {lambda:e} where the coefficient is {coefficient:e}")]
    UndefinedAt { lambda: f64, coefficient: f64 },
    #[error("kernel component {component:e} (relative) exceeds {tolerance:e}")]
    KernelComponent { component: f64, tolerance: f64 },
    #[error("no gap structure at this tolerance; ambiguous clusters {0:?}")]
    AmbiguousClusters(Vec<(f64, f64)>),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("quadrature did not converge: last change {achieved:e}, wanted {wanted:e} (step {step:e})")]
    Quadrature {
        achieved: f64,
        wanted: f64,
        step: f64,
    },
    #[error("truncation bound {bound:e} exceeds tolerance {tolerance:e}")]
    Truncation { bound: f64, tolerance: f64 },
    #[error("all samples fall below the floor {0:e}")]
    BelowFloor(f64),
    #[error("support needs {needed} rings of margin, only {available} available")]
    MarginInsufficient { needed: usize, available: usize },
    #[error("source space is empty after constraints")]
    EmptyBasis,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("time step {dt:e} too coarse, need at most {limit:e}")]
    StepTooCoarse { dt: f64, limit: f64 },
    #[error("time integration unstable at t = {0}")]
    Unstable(f64),
    #[error("pencil rank deficient at order {order}; singular values {profile:?}")]
    RankDeficient { order: usize, profile: Vec<f64> },
    #[error("exponential fit ill-conditioned: condition number {0:e}")]
    IllConditioned(f64),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
