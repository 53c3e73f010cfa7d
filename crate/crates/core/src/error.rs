use thiserror::Error;

use crate::fem::EigenSolution;

/// Errors raised across the toolkit.
///
/// Numeric failures are never reported as NaN: every pole, divergent
/// integral or excluded regime maps onto one of these variants.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent integral: 2*beta - alpha = {gap} must exceed 1 (alpha = {alpha}, beta = {beta})")]
    Divergent { alpha: f64, beta: f64, gap: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error(
        "cell budget exhausted after {cells} cells: value {value:.6e}, error estimate {error_estimate:.3e}"
    )]
    Budget {
        value: f64,
        error_estimate: f64,
        cells: usize,
    },

    #[error("ill-conditioned design matrix (condition number {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("boundary trace vanishes; quotient undefined")]
    ZeroTrace,

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Iteration {
        iterations: usize,
        residual: f64,
        best: Box<EigenSolution>,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
