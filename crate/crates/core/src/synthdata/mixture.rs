//! Standard normal `P` against an equal-weight mixture `Q` of unit-covariance
//! Gaussians centered at `μ·r_m`, with `|r_m| = 1`.
//!
//! The density ratio has the closed form
//! `dQ/dP(x) = (1/M) Σ_m exp(μ⟨r_m, x⟩ − μ²/2)`, and for a single mode
//! `KL(P‖Q) = KL(Q‖P) = μ²/2`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::rng::{stream_rng, tags, Source, Split};
use super::DataError;
use crate::autodiff::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub dim: usize,
    pub modes: usize,
    /// Nominal KL divergence in nats; `mu = sqrt(2·kl_target)`.
    pub kl_target: f64,
    pub mu: f64,
    /// One unit vector per mode.
    pub directions: Vec<Vec<f64>>,
    pub seed: u64,
}

impl MixtureSpec {
    /// Draws the mode directions uniformly on the sphere from `seed`.
    pub fn new(dim: usize, modes: usize, kl_target: f64, seed: u64) -> Result<Self, DataError> {
        check_params(dim, modes, kl_target)?;
        let mut rng = stream_rng(seed, &[tags::DIRECTIONS]);
        let directions = (0..modes)
            .map(|_| loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    break v.into_iter().map(|x| x / norm).collect();
                }
            })
            .collect();
        Ok(Self {
            dim,
            modes,
            kl_target,
            mu: (2.0 * kl_target).sqrt(),
            directions,
            seed,
        })
    }

    /// Uses caller-supplied directions, which must already be unit vectors.
    pub fn with_directions(kl_target: f64, directions: Vec<Vec<f64>>, seed: u64) -> Result<Self, DataError> {
        let dim = directions.first().map_or(0, Vec::len);
        let spec = Self {
            dim,
            modes: directions.len(),
            kl_target,
            mu: (2.0 * kl_target).sqrt(),
            directions,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        check_params(self.dim, self.modes, self.kl_target)?;
        if self.directions.len() != self.modes {
            return Err(DataError::InvalidSpec(format!(
                "{} directions for {} modes",
                self.directions.len(),
                self.modes
            )));
        }
        for (m, r) in self.directions.iter().enumerate() {
            if r.len() != self.dim {
                return Err(DataError::InvalidSpec(format!("direction {m} has length {}", r.len())));
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(DataError::InvalidSpec(format!("direction {m} has norm {norm}")));
            }
        }
        if (self.mu - (2.0 * self.kl_target).sqrt()).abs() > 1e-12 * self.mu.max(1.0) {
            return Err(DataError::InvalidSpec(format!(
                "mu {} inconsistent with kl_target {}",
                self.mu, self.kl_target
            )));
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<(), DataError> {
        if x.len() != self.dim {
            return Err(DataError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `log dQ/dP(x)`, evaluated with log-sum-exp.
    pub fn log_ratio(&self, x: &[f64]) -> Result<f64, DataError> {
        self.check_point(x)?;
        let scores: Vec<f64> = self
            .directions
            .iter()
            .map(|r| self.mu * r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        Ok(lse - (self.modes as f64).ln() - 0.5 * self.mu * self.mu)
    }

    pub fn true_ratio(&self, x: &[f64]) -> Result<f64, DataError> {
        Ok(self.log_ratio(x)?.exp())
    }

    /// `T*(x) = −log dQ/dP(x)`.
    pub fn energy(&self, x: &[f64]) -> Result<f64, DataError> {
        Ok(-self.log_ratio(x)?)
    }

    pub fn true_ratios(&self, points: &Tensor) -> Result<Vec<f64>, DataError> {
        (0..points.rows()).map(|i| self.true_ratio(points.row(i))).collect()
    }

    pub fn energies(&self, points: &Tensor) -> Result<Vec<f64>, DataError> {
        (0..points.rows()).map(|i| self.energy(points.row(i))).collect()
    }

    /// `μ²/2`. Exact for one mode; for several modes it is the nominal value
    /// the directions were scaled by, and an upper bound on the true KL.
    pub fn analytic_kl(&self) -> f64 {
        self.kl_target
    }

    /// `E_P[(dQ/dP)^k]` in closed form.
    ///
    /// Expanding the k-th power of the mixture gives
    /// `M^{−k} Σ_{m_1..m_k} exp(μ²/2·|Σ_j r_{m_j}|² − kμ²/2)`, summed over
    /// all `M^k` index tuples in log space.
    pub fn ratio_moment(&self, k: u32) -> Result<f64, DataError> {
        let terms = (self.modes as f64).powi(k as i32);
        if terms > 2e7 {
            return Err(DataError::InvalidSpec(format!(
                "moment of order {k} with {} modes needs {terms} terms",
                self.modes
            )));
        }
        let mu2 = self.mu * self.mu;
        let mut idx = vec![0usize; k as usize];
        let mut logs = Vec::with_capacity(terms as usize);
        loop {
            let mut s = vec![0.0; self.dim];
            for &m in &idx {
                for (a, b) in s.iter_mut().zip(&self.directions[m]) {
                    *a += b;
                }
            }
            let norm2: f64 = s.iter().map(|x| x * x).sum();
            logs.push(0.5 * mu2 * norm2 - 0.5 * f64::from(k) * mu2);
            // odometer increment
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
                    return Ok((lse - f64::from(k) * (self.modes as f64).ln()).exp());
                }
                idx[pos] += 1;
                if idx[pos] < self.modes {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
}

fn check_params(dim: usize, modes: usize, kl_target: f64) -> Result<(), DataError> {
    if dim == 0 {
        return Err(DataError::InvalidSpec("dimension must be at least 1".into()));
    }
    if modes == 0 {
        return Err(DataError::InvalidSpec("need at least one mode".into()));
    }
    if !(kl_target >= 0.0) || !kl_target.is_finite() {
        return Err(DataError::InvalidSpec(format!("kl_target must be ≥ 0, got {kl_target}")));
    }
    Ok(())
}

/// Rows drawn from one side of a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Tensor,
    pub source: Source,
    pub split: Split,
}

impl SampleSet {
    pub fn new(points: Tensor, source: Source, split: Split) -> Result<Self, DataError> {
        let (rows, _) = points.dims2().map_err(|e| DataError::InvalidSpec(e.to_string()))?;
        if rows == 0 {
            return Err(DataError::Empty);
        }
        Ok(Self { points, source, split })
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Result<SampleSet, DataError> {
        if n == 0 || n > self.len() {
            return Err(DataError::PoolTooSmall {
                requested: n,
                available: self.len(),
            });
        }
        Ok(Self {
            points: self.points.slice_rows(0, n),
            source: self.source,
            split: self.split,
        })
    }
}

fn check_n(n: usize) -> Result<(), DataError> {
    if n == 0 {
        Err(DataError::Empty)
    } else {
        Ok(())
    }
}

/// `n` i.i.d. rows from `N(0, I_d)`.
pub fn sample_p<R: Rng + ?Sized>(spec: &MixtureSpec, n: usize, rng: &mut R) -> Result<SampleSet, DataError> {
    check_n(n)?;
    let data: Vec<f64> = (0..n * spec.dim).map(|_| rng.sample(StandardNormal)).collect();
    SampleSet::new(
        Tensor::matrix(n, spec.dim, data).map_err(|e| DataError::InvalidSpec(e.to_string()))?,
        Source::P,
        Split::Train,
    )
}

/// `n` i.i.d. rows from the mixture, together with the mode of each row.
pub fn sample_q_with_modes<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    n: usize,
    rng: &mut R,
) -> Result<(SampleSet, Vec<usize>), DataError> {
    check_n(n)?;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut modes = Vec::with_capacity(n);
    for _ in 0..n {
        let m = rng.random_range(0..spec.modes);
        modes.push(m);
        for r in &spec.directions[m] {
            let z: f64 = rng.sample(StandardNormal);
            data.push(z + spec.mu * r);
        }
    }
    let set = SampleSet::new(
        Tensor::matrix(n, spec.dim, data).map_err(|e| DataError::InvalidSpec(e.to_string()))?,
        Source::Q,
        Split::Train,
    )?;
    Ok((set, modes))
}

pub fn sample_q<R: Rng + ?Sized>(spec: &MixtureSpec, n: usize, rng: &mut R) -> Result<SampleSet, DataError> {
    Ok(sample_q_with_modes(spec, n, rng)?.0)
}

/// Largest bounding-box side length over all points, a max-norm diameter proxy.
pub fn empirical_diag(sets: &[&SampleSet]) -> Result<f64, DataError> {
    let first = sets.iter().find(|s| !s.is_empty()).ok_or(DataError::Empty)?;
    let d = first.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for s in sets {
        if s.dim() != d {
            return Err(DataError::DimensionMismatch { expected: d, got: s.dim() });
        }
        for i in 0..s.len() {
            for (j, &x) in s.points.row(i).iter().enumerate() {
                lo[j] = lo[j].min(x);
                hi[j] = hi[j].max(x);
            }
        }
    }
    Ok(lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn directions_are_unit() {
        let s = MixtureSpec::new(7, 4, 2.0, 11).unwrap();
        for r in &s.directions {
            let n: f64 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-12);
        }
        assert!((s.mu * s.mu / 2.0 - s.kl_target).abs() < 1e-15);
        assert_eq!(s, MixtureSpec::new(7, 4, 2.0, 11).unwrap());
        s.validate().unwrap();
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MixtureSpec::new(0, 1, 1.0, 0).is_err());
        assert!(MixtureSpec::new(2, 0, 1.0, 0).is_err());
        assert!(MixtureSpec::new(2, 1, -1.0, 0).is_err());
        assert!(MixtureSpec::with_directions(1.0, vec![vec![0.5, 0.5]], 0).is_err());
    }

    #[test]
    fn ratio_special_cases() {
        let zero = MixtureSpec::new(3, 2, 0.0, 1).unwrap();
        assert_eq!(zero.true_ratio(&[0.3, -2.0, 5.0]).unwrap(), 1.0);
        assert_eq!(zero.energy(&[0.3, -2.0, 5.0]).unwrap(), 0.0);

        let one = MixtureSpec::new(4, 1, 1.5, 2).unwrap();
        let x: Vec<f64> = one.directions[0].iter().map(|r| r * one.mu).collect();
        let expect = (one.mu * one.mu / 2.0).exp();
        assert!((one.true_ratio(&x).unwrap() / expect - 1.0).abs() < 1e-12);
        assert!(one.true_ratio(&[0.0; 3]).is_err());
    }

    #[test]
    fn closed_form_moments() {
        let s = MixtureSpec::with_directions(0.5, vec![vec![1.0]], 0).unwrap();
        assert!((s.ratio_moment(2).unwrap() - 1f64.exp()).abs() < 1e-12);
        assert!((s.ratio_moment(1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.ratio_moment(0).unwrap(), 1.0);
        let m = MixtureSpec::new(3, 3, 1.0, 4).unwrap();
        assert!((m.ratio_moment(1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_shapes_and_determinism() {
        let s = MixtureSpec::new(3, 2, 1.0, 5).unwrap();
        let a = sample_p(&s, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_p(&s, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.shape(), &[10, 3]);
        let (q, modes) = sample_q_with_modes(&s, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(q.source, Source::Q);
        assert!(modes.iter().all(|m| *m < 2));
        assert!(sample_p(&s, 0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn diag_of_small_sets() {
        let one = SampleSet::new(Tensor::matrix(1, 2, vec![4.0, 5.0]).unwrap(), Source::P, Split::Train).unwrap();
        assert_eq!(empirical_diag(&[&one]).unwrap(), 0.0);
        let two = SampleSet::new(
            Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 3.0]).unwrap(),
            Source::P,
            Split::Train,
        )
        .unwrap();
        assert_eq!(empirical_diag(&[&two]).unwrap(), 3.0);
        assert!(empirical_diag(&[]).is_err());
    }
}
