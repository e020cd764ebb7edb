//! f-divergence algebra: generators, conjugates, losses and the μ-pointwise form.

mod generator;
mod loss;
mod mu;

pub use generator::{Generator, LossSpec, Parameterization, DEFAULT_ALPHA, DIRECT_FLOOR};
pub use loss::{
    alpha_loss, alpha_loss_on_tape, empirical_loss, empirical_loss_estimate, f_loss_on_tape,
    kl_loss, kl_loss_on_tape, monte_carlo_df, monte_carlo_df_estimate, Objective,
};
pub use mu::{mu_loss_derivative, mu_loss_pointwise, MuDerivatives, MuPoint};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DivergenceError {
    #[error("{loss} loss is not finite (training diverged)")]
    NonFiniteLoss { loss: &'static str },
    #[error("empty sample")]
    EmptySample,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("expected a positive value, got {0}")]
    NonPositive(f64),
    #[error("invalid μ-point: {0}")]
    InvalidMuPoint(String),
    #[error("unknown generator or loss name {0:?}")]
    UnknownName(String),
}
