use thiserror::Error;

use crate::boxqp::QpSolution;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element {element} is inverted or degenerate (jacobian {jacobian:e})")]
    ElementInversion { element: usize, jacobian: f64 },

    #[error("diffusivity tensor is not symmetric positive-definite at ({x}, {y})")]
    TensorNotSpd { x: f64, y: f64 },

    #[error("boundary marker `{0}` has no boundary-condition role")]
    MissingBcRole(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("box QP did not converge in {iterations} iterations (stationarity {stationarity:e})", iterations = .best.iterations, stationarity = .best.kkt.stationarity)]
    QpIterationLimit { best: Box<QpSolution> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
