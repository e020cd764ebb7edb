//! Numeric right-hand sides of the Lp error bounds.

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Lipschitz constant of the energy `−log dQ/dP`.
    pub l: f64,
    /// Lipschitz constant of the estimator.
    pub k: f64,
    pub diag: f64,
    /// `E_P[(dQ/dP)^{2p}]`.
    pub moment_2p: f64,
    /// `E_P[(dQ/dP)^p]`.
    pub moment_p: f64,
    /// `KL(Q‖P)`.
    pub kl: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRhs {
    pub upper: f64,
    pub lower_moment: f64,
    pub lower_kl: f64,
}

/// ```text
/// upper        = L·diag·E_P[r^{2p}]^{1/(2p)} + K·diag
/// lower_moment = E_P[r^p]^{1/p} / L − K·diag
/// lower_kl     = e^{(p−1)/p·KL(Q‖P) − 1} / L − K·diag
/// ```
/// By Jensen, `E_P[r^p]^{1/p} ≥ e^{(p−1)·KL(Q‖P)}`, so `lower_kl ≤ lower_moment`.
pub fn bound_rhs(x: &BoundInputs) -> Result<BoundRhs, AnalysisError> {
    let finite = [x.l, x.k, x.diag, x.moment_2p, x.moment_p, x.kl, x.p];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFiniteInput);
    }
    if !(x.l > 0.0) || x.k < 0.0 || !(x.diag > 0.0) || x.p < 1.0 || x.moment_p <= 0.0 || x.moment_2p <= 0.0 || x.kl < 0.0 {
        return Err(AnalysisError::Invalid(format!("bound inputs out of range: {x:?}")));
    }
    let kd = x.k * x.diag;
    Ok(BoundRhs {
        upper: x.l * x.diag * x.moment_2p.powf(1.0 / (2.0 * x.p)) + kd,
        lower_moment: x.moment_p.powf(1.0 / x.p) / x.l - kd,
        lower_kl: ((x.p - 1.0) / x.p * x.kl - 1.0).exp() / x.l - kd,
    })
}
