use thiserror::Error;

use crate::model::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("unstable: node {node} saturated ({detail})")]
    Unstable { node: NodeId, detail: String },

    #[error("queue overloaded: offered load {rho} >= 1")]
    Overload { rho: f64 },

    #[error("numeric failure: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e}; last residuals {trajectory:?})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        trajectory: Vec<f64>,
    },

    #[error(transparent)]
    Policy(#[from] crate::policy::PolicyError),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("topology parse error at line {line}: {message}")]
    TopologyParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
