use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("metric is singular at {point:?} (|det| = {det:e})")]
    SingularMetric { point: Vec<f64>, det: f64 },
    #[error("symbolic inversion supports dimension at most 4, got {0}")]
    DimensionTooLarge(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid chart: {0}")]
    Chart(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("embedding Jacobian is rank deficient at {point:?}")]
    RankDeficient { point: Vec<f64> },
    #[error("E· is not invertible at {point:?}")]
    NotInvertibleEulerMultiplication { point: Vec<f64> },
    #[error("built metric is not symmetric at {point:?} (residual {residual:e})")]
    AsymmetryDetected { point: Vec<f64>, residual: f64 },
    #[error("T is not an automorphism at {point:?} (det = {det:e})")]
    NotAutomorphism { point: Vec<f64>, det: f64 },
    #[error("no unity: the linear system for e has no solution at {point:?}")]
    NoUnity { point: Vec<f64> },
    #[error("check needs a potential f but none was supplied")]
    MissingPotential,
    #[error("submanifold is not distinguished at {point:?} (residual {residual:e})")]
    NotDistinguished { point: Vec<f64>, residual: f64 },
    #[error("induced metric is singular at {point:?} (|det| = {det:e})")]
    SingularInducedMetric { point: Vec<f64>, det: f64 },
    #[error("closure hypothesis {hypothesis} fails at {point:?} (residual {residual:e})")]
    ClosureFailed { hypothesis: String, point: Vec<f64>, residual: f64 },
    #[error("singular pencil: {0}")]
    SingularPencil(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
