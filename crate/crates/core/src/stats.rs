//! Small descriptive-statistics helpers shared by the Monte Carlo routines.

use serde::{Deserialize, Serialize};

/// Number of groups used for batch-means standard errors.
pub const STDERR_GROUPS: usize = 20;

/// A Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Sample mean with the usual `s/√n` standard error.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = mean(xs);
        let stderr = if xs.len() > 1 {
            (sample_variance(xs, mean) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }

    /// Sample mean with a standard error from the spread of group means.
    ///
    /// Falls back to [`Estimate::from_samples`] when there are fewer samples than groups.
    pub fn batch_means(xs: &[f64], groups: usize) -> Self {
        if xs.len() < 2 * groups || groups < 2 {
            return Self::from_samples(xs);
        }
        let mean = mean(xs);
        let size = xs.len() / groups;
        let means: Vec<f64> = (0..groups)
            .map(|g| {
                let end = if g + 1 == groups { xs.len() } else { (g + 1) * size };
                self::mean(&xs[g * size..end])
            })
            .collect();
        let gm = self::mean(&means);
        let stderr = (sample_variance(&means, gm) / groups as f64).sqrt();
        Self { mean, stderr }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance about a precomputed mean.
pub fn sample_variance(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Linear-interpolation quantile (the "type 7" rule), `q ∈ [0, 1]`.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Median with 25th and 75th percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            median: median(xs),
            q25: quantile(xs, 0.25),
            q75: quantile(xs, 0.75),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&xs), 2.5);
        assert_eq!(quantile(&xs, 0.25), 1.75);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn estimates() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let xs: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let b = Estimate::batch_means(&xs, 20);
        assert!((b.mean - mean(&xs)).abs() < 1e-12);
        assert!(b.stderr >= 0.0);
        assert_eq!(Estimate::batch_means(&[5.0; 40], 20).stderr, 0.0);
    }
}
