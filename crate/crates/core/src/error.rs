use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("m = {value:e} below delta = {delta:e} at x = {x}, t = {t}")]
    EvalDomain { x: f64, t: f64, value: f64, delta: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("field has no cell above the support threshold")]
    EmptySupport,

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite density in cell {cell} at step {step}")]
    NonFinite { step: u64, cell: usize },

    #[error("step budget {steps} exhausted at t = {t}")]
    MaxSteps { steps: u64, t: f64 },

    #[error("support reached cell {cell} (within the boundary guard band) at t = {t}")]
    SupportNearBoundary { t: f64, cell: usize },

    #[error("congestion condition fails (margin {margin:e})")]
    NotCongested { margin: f64 },

    #[error("streamline left the domain at x = {x}, t = {t}")]
    LeftDomain { x: f64, t: f64 },

    #[error("evaluation region is not inside the eroded positivity set of the barrier")]
    RegionOutsidePositivity,

    #[error("initial ordering between barrier and solution fails by {violation:e}")]
    InitialOrderingFails { violation: f64 },

    #[error("expected a single front at t = {t}, found {count} support components")]
    MultipleFronts { t: f64, count: usize },

    #[error("m - rho_E = {value:e} below the margin at t = {t}")]
    DegenerateDenominator { t: f64, value: f64 },

    #[error("initial data is not a patch: v = {v} in cell {cell}")]
    NotAPatch { cell: usize, v: f64 },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
