use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {what} at flat index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("right-hand side has mean {mean:e} on component {component}, above tolerance {tolerance:e}")]
    ZeroMeanViolation {
        component: usize,
        mean: f64,
        tolerance: f64,
    },

    #[error("coefficient a_{index} is negative ({value:e}) at node {node}")]
    NegativeCoefficient { index: usize, node: usize, value: f64 },

    #[error("exponent <u_{weight}, xi> = {value:e} at node {node} exceeds the overflow guard")]
    ExponentOverflow { weight: usize, node: usize, value: f64 },

    #[error("cone LP could not certify either side: {reason}")]
    LpNumericalFailure {
        reason: String,
        witness: Option<Vec<f64>>,
        separator: Option<Vec<f64>>,
    },

    #[error("W lies within 10 tau_cone of the cone boundary (margin {margin:e}); rerun in audit mode")]
    NearBoundary { margin: f64 },

    #[error("{field} is not basic for the foliation (defect {defect:e} > {tolerance:e})")]
    NotBasicData {
        field: String,
        defect: f64,
        tolerance: f64,
    },

    #[error("asymmetric cyclic data: {0}")]
    AsymmetricData(String),

    #[error("equivalence clauses disagree: {0}")]
    InconsistencyDetected(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
