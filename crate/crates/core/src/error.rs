use thiserror::Error;

use crate::problem::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("problem violates {} hypothesis(es): {}", .0.len(), join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("cannot construct solution: {0}")]
    Construction(String),

    #[error("quadrature did not reach tolerance {tolerance:e} within {evaluations} evaluations (estimate {estimate}, error {error:e})")]
    Quadrature {
        estimate: f64,
        error: f64,
        tolerance: f64,
        evaluations: usize,
    },

    #[error("unstable grid: dt = {dt:e} exceeds the explicit bound {required:e}")]
    Stability { dt: f64, required: f64 },

    #[error("closed-form flux fails its Volterra residual check ({residual:e} > {tolerance:e})")]
    ResidualCheck { residual: f64, tolerance: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
