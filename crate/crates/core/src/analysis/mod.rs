//! Error metrics, nearest-neighbor moment checks and bound evaluation.

mod bounds;
mod lp;
mod nn;
mod report;

use rand::Rng;
use thiserror::Error;

pub use bounds::{bound_rhs, BoundInputs, BoundRhs};
pub use lp::{lp_error, lp_error_values, LpError};
pub use nn::{
    nearest_neighbor, nn_distances, nn_moment_lower_check, nn_moment_upper_check, nn_moment_upper_estimate,
    nn_upper_bound, BoundSide, NnDomain, NnLowerCheck, NnMomentEstimate, Verdict, LOWER_SLACK, MAX_RELATIVE_STDERR,
};
pub use report::{
    evaluate, fmt, ratio_moment, EvalInputs, EvalReport, OrderBounds, DEFAULT_LIPSCHITZ_PAIRS, DEFAULT_P_ORDERS,
};

use crate::stats::{Estimate, STDERR_GROUPS};
use crate::synthdata::{sample_p, DataError, MixtureSpec};
use crate::trainer::TrainError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Invalid(String),
    #[error("empty sample")]
    Empty,
    #[error("order κ = {kappa} exceeds dimension d = {d}; the bound assumes 1 ≤ κ ≤ d")]
    OutsideHypothesis { kappa: f64, d: usize },
    #[error("non-finite bound input")]
    NonFiniteInput,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Monte Carlo `E_P[(dQ/dP)^k]` over `n` fresh P-samples.
pub fn moment_estimate<R: Rng + ?Sized>(spec: &MixtureSpec, k: f64, n: usize, rng: &mut R) -> Result<Estimate, AnalysisError> {
    if !(k >= 1.0) {
        return Err(AnalysisError::Invalid(format!("moment order must be ≥ 1, got {k}")));
    }
    let xs = sample_p(spec, n, rng)?;
    let vals: Vec<f64> = (0..n)
        .map(|i| Ok((k * spec.log_ratio(xs.points.row(i))?).exp()))
        .collect::<Result<_, DataError>>()?;
    Ok(Estimate::batch_means(&vals, STDERR_GROUPS))
}
