//! Special functions and small-dimension optimizers shared by the
//! statistical modules.
//!
//! Everything here is a pure function of its inputs.

mod gamma;
mod optimize;

pub use gamma::{chi2_sf, ln_gamma, regularized_gamma_upper, ChiSquareParams};
pub use optimize::{
    newton_raphson_mle, steepest_ascent, symmetric_condition, AscentResult, FirstOrder,
    NewtonResult, OptimizerConfig, SecondOrder, MAX_HESSIAN_CONDITION,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite objective or gradient at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("singular or ill-conditioned Hessian at iteration {iteration} (condition number {condition:e})")]
    SingularHessian { iteration: usize, condition: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
