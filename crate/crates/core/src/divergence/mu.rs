//! Pointwise form of the loss against a dominating measure μ.
//!
//! At a point `x` with densities `dQ/dμ(x)` and `dP/dμ(x)`, a candidate ratio
//! value `u > 0` incurs `−f'(u)·dQ/dμ + f*(f'(u))·dP/dμ`. This is minimized
//! exactly at `u = dQ/dP(x)`, where it equals `−f(dQ/dP)·dP/dμ`.

use serde::{Deserialize, Serialize};

use super::generator::Generator;
use super::DivergenceError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuPoint {
    pub u: f64,
    pub dq_dmu: f64,
    pub dp_dmu: f64,
}

impl MuPoint {
    pub fn new(u: f64, dq_dmu: f64, dp_dmu: f64) -> Result<Self, DivergenceError> {
        if !(u > 0.0) || !u.is_finite() {
            return Err(DivergenceError::NonPositive(u));
        }
        if !(dq_dmu >= 0.0 && dp_dmu >= 0.0) || (dq_dmu == 0.0 && dp_dmu == 0.0) {
            return Err(DivergenceError::InvalidMuPoint(format!(
                "densities ({dq_dmu}, {dp_dmu}) must be non-negative and not both zero"
            )));
        }
        Ok(Self { u, dq_dmu, dp_dmu })
    }

    /// Densities for μ = (P+Q)/2 at a point where `dQ/dP = ratio`.
    pub fn from_ratio(u: f64, ratio: f64) -> Result<Self, DivergenceError> {
        if !(ratio >= 0.0) || !ratio.is_finite() {
            return Err(DivergenceError::InvalidMuPoint(format!("ratio {ratio}")));
        }
        let dp = 2.0 / (1.0 + ratio);
        Self::new(u, 2.0 - dp, dp)
    }

    /// `dQ/dP` at the point; infinite where `dP/dμ = 0`.
    pub fn ratio(&self) -> f64 {
        self.dq_dmu / self.dp_dmu
    }

    pub fn with_u(self, u: f64) -> Result<Self, DivergenceError> {
        Self::new(u, self.dq_dmu, self.dp_dmu)
    }
}

pub fn mu_loss_pointwise(gen: Generator, pt: &MuPoint) -> f64 {
    -gen.f_prime(pt.u) * pt.dq_dmu + gen.conj_of_fprime(pt.u) * pt.dp_dmu
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuDerivatives {
    pub first: f64,
    pub second: f64,
}

/// First and second `u`-derivatives of [`mu_loss_pointwise`].
///
/// Written as `f''(u)·(u·dP/dμ − dQ/dμ)`, which equals
/// `(u − dQ/dP)·f''(u)·dP/dμ` and stays defined when `dP/dμ = 0`.
pub fn mu_loss_derivative(gen: Generator, pt: &MuPoint) -> MuDerivatives {
    let gap = pt.u * pt.dp_dmu - pt.dq_dmu;
    MuDerivatives {
        first: gen.f_double_prime(pt.u) * gap,
        second: gen.f_triple_prime(pt.u) * gap + gen.f_double_prime(pt.u) * pt.dp_dmu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(MuPoint::new(0.0, 1.0, 1.0).is_err());
        assert!(MuPoint::new(-1.0, 1.0, 1.0).is_err());
        assert!(MuPoint::new(1.0, 0.0, 0.0).is_err());
        assert!(MuPoint::new(1.0, -0.1, 1.0).is_err());
        let p = MuPoint::from_ratio(1.0, 3.0).unwrap();
        assert!((p.dq_dmu + p.dp_dmu - 2.0).abs() < 1e-15);
        assert!((p.ratio() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_at_equal_densities() {
        for g in Generator::all_default() {
            let pt = MuPoint::new(1.0, 1.0, 1.0).unwrap();
            let expect = -g.f(1.0); // zero except for the unnormalized GAN generator
            assert!((mu_loss_pointwise(g, &pt) - expect).abs() < 1e-15, "{g}");
        }
    }

    #[test]
    fn derivative_vanishes_at_ratio() {
        let pt = MuPoint::new(3.0, 1.5, 0.5).unwrap();
        for g in Generator::all_default() {
            let d = mu_loss_derivative(g, &pt);
            assert_eq!(d.first, 0.0);
            assert!((d.second - g.f_double_prime(3.0) * 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn q_only_point_keeps_decreasing() {
        let pt = MuPoint::new(2.0, 2.0, 0.0).unwrap();
        assert!(mu_loss_derivative(Generator::Kl, &pt).first < 0.0);
    }
}
