//! `L_p(P)` error of a ratio estimate.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::stats::{Estimate, STDERR_GROUPS};
use crate::synthdata::{MixtureSpec, SampleSet, Source};
use crate::trainer::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpError {
    pub p: f64,
    pub value: f64,
    /// Delta-method stderr from the stderr of the p-th moment.
    pub stderr: f64,
}

/// `((1/n) Σ |truth_i − estimate_i|^p)^{1/p}`.
pub fn lp_error_values(estimate: &[f64], truth: &[f64], p: f64) -> Result<LpError, AnalysisError> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(AnalysisError::Invalid(format!("p must be ≥ 1, got {p}")));
    }
    if estimate.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if estimate.len() != truth.len() {
        return Err(AnalysisError::Invalid(format!(
            "{} estimates for {} true values",
            estimate.len(),
            truth.len()
        )));
    }
    let powers: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| (a - b).abs().powf(p)).collect();
    let m = Estimate::batch_means(&powers, STDERR_GROUPS);
    let value = m.mean.powf(1.0 / p);
    let stderr = if m.mean > 0.0 {
        m.mean.powf(1.0 / p - 1.0) / p * m.stderr
    } else {
        0.0
    };
    Ok(LpError { p, value, stderr })
}

/// Monte Carlo `L_p(P)` distance between the model's ratio and the true one on
/// P-distributed test points.
pub fn lp_error(model: &TrainedModel, spec: &MixtureSpec, test_p: &SampleSet, p: f64) -> Result<LpError, AnalysisError> {
    if test_p.source != Source::P {
        return Err(AnalysisError::Invalid("test points must be drawn from P".into()));
    }
    let phi = model.predict_ratio(&test_p.points)?;
    let truth = spec.true_ratios(&test_p.points)?;
    lp_error_values(&phi, &truth, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_estimate_has_zero_error() {
        let t = [0.5, 1.0, 3.0];
        for p in [1.0, 2.0, 3.0] {
            let e = lp_error_values(&t, &t, p).unwrap();
            assert_eq!(e.value, 0.0);
            assert_eq!(e.stderr, 0.0);
        }
    }

    #[test]
    fn small_cases() {
        let e = lp_error_values(&[0.0, 0.0], &[1.0, 3.0], 1.0).unwrap();
        assert_eq!(e.value, 2.0);
        let e = lp_error_values(&[0.0, 0.0], &[1.0, 3.0], 2.0).unwrap();
        assert!((e.value - 5f64.sqrt()).abs() < 1e-15);
        assert!(lp_error_values(&[], &[], 1.0).is_err());
        assert!(lp_error_values(&[1.0], &[1.0], 0.5).is_err());
    }
}
