use thiserror::Error;

/// Errors produced by tree construction, model validation and the size guards.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parent array at index {index}: {reason}")]
    InvalidParent { index: usize, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("vertex {0} is out of range for a tree with {1} vertices")]
    InvalidVertex(usize, usize),

    #[error("parameter b = {0} is outside [0, 1)")]
    InvalidB(f64),

    #[error("flip probability p = {0} is outside (0, 1/2]")]
    InvalidFlipProbability(f64),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("vertex count overflows for {0}")]
    Overflow(String),

    #[error("{what} needs {required} entries, over the limit of {limit}")]
    SizeGuard {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("function is not 1-Lipschitz: |f({x}) - f({y})| = {gap} > d = {distance}")]
    NotLipschitz {
        x: usize,
        y: usize,
        gap: f64,
        distance: f64,
    },

    #[error("invalid ordering: {0}")]
    InvalidOrder(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_b(b: f64) -> Result<()> {
    if (0.0..1.0).contains(&b) {
        Ok(())
    } else {
        Err(Error::InvalidB(b))
    }
}
