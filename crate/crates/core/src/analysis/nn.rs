//! Nearest-neighbor distance moments under the max norm.
//!
//! Upper side: for `x` and `X_1..X_N` i.i.d. from μ on a domain of max-norm
//! diameter `diag`, `E‖X^{(1)}(x) − x‖∞^κ ≤ diag^κ·(1/(N+1))^{κ/d}` whenever
//! `1 ≤ κ ≤ d`.
//!
//! Lower side: for `x, X_i ~ P`, the scaled weighted moment
//! `N^{1/d}·E[(dQ/dP(X^{(1)}))^p·‖X^{(1)} − x‖∞^p]^{1/p}` is asymptotically at
//! least `e^{−1}·E_P[(dQ/dP)^p]^{1/p}`. That statement is a liminf, so the
//! finite-N check is directional with a slack factor.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::autodiff::Tensor;
use crate::stats::{Estimate, STDERR_GROUPS};
use crate::synthdata::{MixtureSpec, SampleSet};

pub const LOWER_SLACK: f64 = 0.25;
/// Relative standard error above which a lower-bound cell is inconclusive.
pub const MAX_RELATIVE_STDERR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Upper,
    Lower,
}

/// One Monte Carlo cell.
///
/// For the upper side `estimate` is the raw moment `E‖X^{(1)} − x‖∞^κ` and
/// `bound` the non-asymptotic right-hand side. For the lower side `estimate`
/// is the `N^{1/d}`-scaled weighted moment and `bound` the asymptotic constant
/// it is compared to. `scaled` is always `N^{1/d}·moment^{1/order}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnMomentEstimate {
    pub side: BoundSide,
    pub n: usize,
    pub d: usize,
    pub order: f64,
    pub weighted: bool,
    pub trials: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub scaled: f64,
    pub bound: f64,
    pub verdict: Verdict,
}

impl NnMomentEstimate {
    pub fn satisfied(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Where the points of an upper-side check come from.
#[derive(Debug, Clone, PartialEq)]
pub enum NnDomain {
    /// Uniform on `[0, 1]^d`.
    UnitCube(usize),
    /// Uniform over the rows of a fixed point cloud (its empirical measure).
    SampleCloud(Tensor),
}

impl NnDomain {
    pub fn dim(&self) -> usize {
        match self {
            Self::UnitCube(d) => *d,
            Self::SampleCloud(t) => t.cols(),
        }
    }

    /// Max-norm diameter: 1 for the cube, the bounding-box side for a cloud.
    pub fn diag(&self) -> f64 {
        match self {
            Self::UnitCube(_) => 1.0,
            Self::SampleCloud(t) => {
                let d = t.cols();
                (0..d)
                    .map(|j| {
                        let col = (0..t.rows()).map(|i| t.row(i)[j]);
                        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                            (lo.min(x), hi.max(x))
                        });
                        hi - lo
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match self {
            Self::UnitCube(d) => out.extend((0..n * d).map(|_| rng.random::<f64>())),
            Self::SampleCloud(t) => {
                for _ in 0..n {
                    out.extend_from_slice(t.row(rng.random_range(0..t.rows())));
                }
            }
        }
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        match self {
            Self::UnitCube(0) => Err(AnalysisError::Invalid("cube dimension must be ≥ 1".into())),
            Self::SampleCloud(t) if t.shape().len() != 2 || t.rows() == 0 || t.cols() == 0 => {
                Err(AnalysisError::Invalid("sample cloud must be a non-empty matrix".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Index and max-norm distance of the nearest row of `points` (row-major,
/// `d` columns) to `x`. Ties go to the lowest index.
pub fn nearest_neighbor(points: &[f64], d: usize, x: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in points.chunks_exact(d).enumerate() {
        let mut dist = 0.0f64;
        for (a, b) in row.iter().zip(x) {
            dist = dist.max((a - b).abs());
        }
        if best.is_none_or(|(_, bd)| dist < bd) {
            best = Some((i, dist));
        }
    }
    best
}

/// `diag^κ·(1/(N+1))^{κ/d}`.
pub fn nn_upper_bound(diag: f64, n: usize, d: usize, kappa: f64) -> f64 {
    diag.powf(kappa) * (1.0 / (n as f64 + 1.0)).powf(kappa / d as f64)
}

fn check_common(n: usize, order: f64, trials: usize) -> Result<(), AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::Invalid("N must be ≥ 1".into()));
    }
    if !(order >= 1.0) || !order.is_finite() {
        return Err(AnalysisError::Invalid(format!("order must be ≥ 1, got {order}")));
    }
    if trials < 2 {
        return Err(AnalysisError::Invalid("need at least two trials".into()));
    }
    Ok(())
}

/// Monte Carlo check of the non-asymptotic NN moment bound. Requires
/// `1 ≤ κ ≤ d`; see [`nn_moment_upper_estimate`] to evaluate outside that range.
pub fn nn_moment_upper_check<R: Rng + ?Sized>(
    domain: &NnDomain,
    n: usize,
    kappa: f64,
    trials: usize,
    rng: &mut R,
) -> Result<NnMomentEstimate, AnalysisError> {
    let d = domain.dim();
    if kappa > d as f64 {
        return Err(AnalysisError::OutsideHypothesis { kappa, d });
    }
    nn_moment_upper_estimate(domain, n, kappa, trials, rng)
}

/// Same estimate and comparison as [`nn_moment_upper_check`] without the
/// `κ ≤ d` restriction.
pub fn nn_moment_upper_estimate<R: Rng + ?Sized>(
    domain: &NnDomain,
    n: usize,
    kappa: f64,
    trials: usize,
    rng: &mut R,
) -> Result<NnMomentEstimate, AnalysisError> {
    domain.validate()?;
    check_common(n, kappa, trials)?;
    let d = domain.dim();
    let mut pts = Vec::with_capacity(n * d);
    let mut x = Vec::with_capacity(d);
    let samples: Vec<f64> = (0..trials)
        .map(|_| {
            domain.draw(1, rng, &mut x);
            domain.draw(n, rng, &mut pts);
            let (_, dist) = nearest_neighbor(&pts, d, &x).expect("n ≥ 1");
            dist.powf(kappa)
        })
        .collect();
    let est = Estimate::batch_means(&samples, STDERR_GROUPS);
    let bound = nn_upper_bound(domain.diag(), n, d, kappa);
    Ok(NnMomentEstimate {
        side: BoundSide::Upper,
        n,
        d,
        order: kappa,
        weighted: false,
        trials,
        estimate: est.mean,
        stderr: est.stderr,
        scaled: (n as f64).powf(1.0 / d as f64) * est.mean.powf(1.0 / kappa),
        bound,
        verdict: if est.mean <= bound + 3.0 * est.stderr {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    })
}

/// The lower-side trend over an N grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnLowerCheck {
    pub d: usize,
    pub p: f64,
    pub kl_target: f64,
    /// `E_P[(dQ/dP)^p]`.
    pub ratio_moment: f64,
    /// `e^{−1}·E_P[(dQ/dP)^p]^{1/p}`.
    pub target: f64,
    pub slack: f64,
    pub trend: Vec<NnMomentEstimate>,
    pub verdict: Verdict,
}

/// Estimates the scaled weighted NN moment with `x` and the `N` points drawn
/// from `P`, for each `N` in `n_grid`, and compares the value at the largest
/// `N` with `(1 − slack)·e^{−1}·E_P[(dQ/dP)^p]^{1/p}`.
///
/// `E_P[(dQ/dP)^p]` is taken in closed form for integer `p` and by Monte Carlo
/// with `trials·64` draws otherwise; the cell is inconclusive if either the
/// weighted moment or that ratio moment has relative stderr above 50%.
pub fn nn_moment_lower_check<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    n_grid: &[usize],
    p: f64,
    trials: usize,
    rng: &mut R,
) -> Result<NnLowerCheck, AnalysisError> {
    if n_grid.is_empty() {
        return Err(AnalysisError::Invalid("empty N grid".into()));
    }
    let d = spec.dim;
    let (ratio_moment, moment_rel_se) = if p.fract() == 0.0 && p <= 8.0 {
        (spec.ratio_moment(p as u32)?, 0.0)
    } else {
        let e = super::moment_estimate(spec, p, trials.max(1) * 64, rng)?;
        (e.mean, e.stderr / e.mean)
    };
    let target = (-1.0f64).exp() * ratio_moment.powf(1.0 / p);
    let weighted = spec.kl_target > 0.0;

    let mut trend = Vec::with_capacity(n_grid.len());
    let mut pts = Vec::new();
    let mut x = vec![0.0; d];
    for &n in n_grid {
        check_common(n, p, trials)?;
        let samples = (0..trials)
            .map(|_| {
                x.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                pts.clear();
                pts.extend((0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let (i, dist) = nearest_neighbor(&pts, d, &x).expect("n ≥ 1");
                let w = if weighted {
                    spec.true_ratio(&pts[i * d..(i + 1) * d])?.powf(p)
                } else {
                    1.0
                };
                Ok(w * dist.powf(p))
            })
            .collect::<Result<Vec<f64>, AnalysisError>>()?;
        let est = Estimate::batch_means(&samples, STDERR_GROUPS);
        let scale = (n as f64).powf(1.0 / d as f64);
        let value = scale * est.mean.powf(1.0 / p);
        // delta method for m ↦ m^{1/p}
        let se = if est.mean > 0.0 {
            scale * est.mean.powf(1.0 / p - 1.0) / p * est.stderr
        } else {
            0.0
        };
        let rel = if est.mean > 0.0 { est.stderr / est.mean } else { f64::INFINITY };
        let verdict = if rel > MAX_RELATIVE_STDERR || moment_rel_se > MAX_RELATIVE_STDERR {
            Verdict::Inconclusive
        } else if value >= (1.0 - LOWER_SLACK) * target {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        trend.push(NnMomentEstimate {
            side: BoundSide::Lower,
            n,
            d,
            order: p,
            weighted,
            trials,
            estimate: value,
            stderr: se,
            scaled: value,
            bound: target,
            verdict,
        });
    }
    let largest = trend
        .iter()
        .max_by_key(|t| t.n)
        .expect("grid is non-empty");
    Ok(NnLowerCheck {
        d,
        p,
        kl_target: spec.kl_target,
        ratio_moment,
        target,
        slack: LOWER_SLACK,
        verdict: largest.verdict,
        trend,
    })
}

/// NN distances from each row of `queries` to the nearest row of `points`.
pub fn nn_distances(points: &SampleSet, queries: &Tensor) -> Result<Vec<f64>, AnalysisError> {
    let d = points.dim();
    if queries.cols() != d {
        return Err(AnalysisError::Invalid(format!(
            "queries have dimension {}, points {d}",
            queries.cols()
        )));
    }
    Ok((0..queries.rows())
        .map(|i| nearest_neighbor(points.points.data(), d, queries.row(i)).expect("non-empty").1)
        .collect())
}
