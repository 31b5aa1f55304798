use thiserror::Error;

/// Errors produced by the solver library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polynomial degree {0}: must be at least 1")]
    InvalidDegree(usize),

    #[error("nodal field size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-positive Jacobian {value:e} in element {element} at node {node} (t = {time:e})")]
    NonPositiveJacobian {
        element: usize,
        node: usize,
        time: f64,
        value: f64,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("connectivity error: {0}")]
    Connectivity(String),

    #[error("eigensolver did not reach tolerance: off-diagonal norm {residual:e}")]
    Eigen { residual: f64 },

    #[error("time integration failed at step {step}: non-finite state")]
    Integration { step: usize },

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
