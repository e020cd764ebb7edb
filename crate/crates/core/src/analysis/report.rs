//! Full evaluation of one trained estimator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bounds::{bound_rhs, BoundInputs};
use super::lp::{lp_error, LpError};
use super::{moment_estimate, AnalysisError};
use crate::synthdata::{empirical_diag, MixtureSpec, SampleSet};
use crate::trainer::{estimate_lipschitz, TrainError, TrainedModel};

pub const DEFAULT_P_ORDERS: [f64; 3] = [1.0, 2.0, 3.0];
pub const DEFAULT_LIPSCHITZ_PAIRS: usize = 20_000;

const PROXY_NOTE: &str = "diag is the max-norm bounding-box side of the pooled training samples; \
L and K are sampled-pair lower bounds on the Lipschitz constants of the true energy and of the \
estimated ratio; the estimator is not constrained to a Lipschitz class";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderBounds {
    pub p: f64,
    /// `E_P[(dQ/dP)^p]`.
    pub moment_p: f64,
    /// `E_P[(dQ/dP)^{2p}]`.
    pub moment_2p: f64,
    pub upper: f64,
    pub lower_moment: f64,
    pub lower_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub loss: String,
    pub seed: u64,
    pub n_train: usize,
    pub d: usize,
    pub m: usize,
    pub analytic_kl: f64,
    pub p_orders: Vec<f64>,
    pub lp_errors: Vec<LpError>,
    /// `N^{1/d}·L_p` error per order, for comparing rates across sizes.
    pub rate_scaled_errors: Vec<f64>,
    pub diag: f64,
    pub lipschitz_energy: f64,
    pub lipschitz_estimator: f64,
    pub bounds: Vec<OrderBounds>,
    pub proxy_note: String,
}

impl EvalReport {
    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp_errors.iter().find(|e| e.p == p).map(|e| e.value)
    }

    pub fn bounds_for(&self, p: f64) -> Option<&OrderBounds> {
        self.bounds.iter().find(|b| b.p == p)
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    /// Fixed columns followed by one block per order `p` (suffix `_p<p>`).
    pub fn csv_header(p_orders: &[f64]) -> Vec<String> {
        let mut h: Vec<String> = [
            "loss",
            "seed",
            "n_train",
            "d",
            "m",
            "analytic_kl",
            "diag",
            "lipschitz_energy",
            "lipschitz_estimator",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for p in p_orders {
            for col in PER_ORDER_COLUMNS {
                h.push(format!("{col}_p{p}"));
            }
        }
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![
            self.loss.clone(),
            self.seed.to_string(),
            self.n_train.to_string(),
            self.d.to_string(),
            self.m.to_string(),
            fmt(self.analytic_kl),
            fmt(self.diag),
            fmt(self.lipschitz_energy),
            fmt(self.lipschitz_estimator),
        ];
        for ((e, b), s) in self.lp_errors.iter().zip(&self.bounds).zip(&self.rate_scaled_errors) {
            row.extend(
                [e.value, e.stderr, *s, b.moment_p, b.moment_2p, b.upper, b.lower_moment, b.lower_kl]
                    .into_iter()
                    .map(fmt),
            );
        }
        row
    }
}

const PER_ORDER_COLUMNS: [&str; 8] = [
    "lp_error",
    "lp_stderr",
    "rate_scaled_error",
    "moment_p",
    "moment_2p",
    "upper",
    "lower_moment",
    "lower_kl",
];

/// Shortest representation that parses back to the same `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// `E_P[(dQ/dP)^k]`: closed form for one mode (`e^{k(k−1)μ²/2}`) or integer
/// `k`, Monte Carlo with `mc_draws` samples otherwise.
pub fn ratio_moment<R: Rng + ?Sized>(spec: &MixtureSpec, k: f64, mc_draws: usize, rng: &mut R) -> Result<f64, AnalysisError> {
    if spec.modes == 1 {
        return Ok((0.5 * k * (k - 1.0) * spec.mu * spec.mu).exp());
    }
    if k.fract() == 0.0 && k >= 0.0 {
        if let Ok(v) = spec.ratio_moment(k as u32) {
            return Ok(v);
        }
    }
    Ok(moment_estimate(spec, k, mc_draws, rng)?.mean)
}

pub struct EvalInputs<'a> {
    /// Sets whose pooled bounding box gives the diagonal proxy.
    pub diag_sets: &'a [&'a SampleSet],
    pub test_p: &'a SampleSet,
    pub n_train: usize,
    pub seed: u64,
    pub p_orders: &'a [f64],
    pub lipschitz_pairs: usize,
}

pub fn evaluate<R: Rng + ?Sized>(
    model: &TrainedModel,
    spec: &MixtureSpec,
    inputs: &EvalInputs<'_>,
    rng: &mut R,
) -> Result<EvalReport, AnalysisError> {
    if inputs.p_orders.is_empty() {
        return Err(AnalysisError::Invalid("no p orders".into()));
    }
    let test = &inputs.test_p.points;
    let diag = empirical_diag(inputs.diag_sets)?;
    let energy = |t: &crate::autodiff::Tensor| Ok::<_, TrainError>(spec.energies(t)?);
    let l = estimate_lipschitz(energy, test, inputs.lipschitz_pairs, rng)?;
    let k = estimate_lipschitz(|t| model.predict_ratio(t), test, inputs.lipschitz_pairs, rng)?;
    // A zero-KL problem has a constant energy; keep L positive so 1/L stays finite.
    let l_used = if l > 0.0 { l } else { f64::MIN_POSITIVE.sqrt() };

    let mut lp_errors = Vec::new();
    let mut bounds = Vec::new();
    let mut scaled = Vec::new();
    let rate = (inputs.n_train as f64).powf(1.0 / spec.dim as f64);
    for &p in inputs.p_orders {
        let e = lp_error(model, spec, inputs.test_p, p)?;
        let moment_p = ratio_moment(spec, p, 200_000, rng)?;
        let moment_2p = ratio_moment(spec, 2.0 * p, 200_000, rng)?;
        let b = bound_rhs(&BoundInputs {
            l: l_used,
            k,
            diag: diag.max(f64::MIN_POSITIVE),
            moment_2p,
            moment_p,
            kl: spec.analytic_kl(),
            p,
        })?;
        scaled.push(rate * e.value);
        lp_errors.push(e);
        bounds.push(OrderBounds {
            p,
            moment_p,
            moment_2p,
            upper: b.upper,
            lower_moment: b.lower_moment,
            lower_kl: b.lower_kl,
        });
    }
    Ok(EvalReport {
        loss: model.objective.to_string(),
        seed: inputs.seed,
        n_train: inputs.n_train,
        d: spec.dim,
        m: spec.modes,
        analytic_kl: spec.analytic_kl(),
        p_orders: inputs.p_orders.to_vec(),
        lp_errors,
        rate_scaled_errors: scaled,
        diag,
        lipschitz_energy: l,
        lipschitz_estimator: k,
        bounds,
        proxy_note: PROXY_NOTE.to_string(),
    })
}
