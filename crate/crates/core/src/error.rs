use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("no strongly connected sample after {attempts} attempts (n = {n}, p = {p})")]
    SamplingExhausted { n: usize, p: f64, attempts: usize },

    #[error("invalid gossip matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid delay specification: {0}")]
    InvalidDelays(String),

    #[error("{what} did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("stationary weight of node {node} is not positive ({value:e})")]
    NonPositiveWeight { node: usize, value: f64 },

    #[error("negative mixing weight {0}")]
    NegativeWeight(f64),

    #[error("node id collision: nodes {first} and {second} drew id {id:#018x}")]
    IdCollision {
        id: u64,
        first: usize,
        second: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("state diverged at iteration {iteration}, node {node} (value {value:e})")]
    Diverged {
        iteration: usize,
        node: usize,
        value: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
