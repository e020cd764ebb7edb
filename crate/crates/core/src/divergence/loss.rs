//! Empirical variational losses, on plain slices and on a gradient tape.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::generator::{Generator, LossSpec, Parameterization};
use super::DivergenceError;
use crate::autodiff::{AutodiffError, ElementwiseFn, Tape, Var};
use crate::stats::{mean, sample_variance, Estimate};

fn non_empty(t_on_p: &[f64], t_on_q: &[f64]) -> Result<(), DivergenceError> {
    if t_on_p.is_empty() || t_on_q.is_empty() {
        Err(DivergenceError::EmptySample)
    } else {
        Ok(())
    }
}

fn finite(loss: &'static str, v: f64) -> Result<f64, DivergenceError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DivergenceError::NonFiniteLoss { loss })
    }
}

/// `(1/S) Σ −f'(φ(T_Q)) + (1/R) Σ f*(f'(φ(T_P)))`.
pub fn empirical_loss(spec: &LossSpec, t_on_p: &[f64], t_on_q: &[f64]) -> Result<f64, DivergenceError> {
    Ok(empirical_loss_estimate(spec, t_on_p, t_on_q)?.mean)
}

/// [`empirical_loss`] with the standard error of the two sample means combined.
pub fn empirical_loss_estimate(
    spec: &LossSpec,
    t_on_p: &[f64],
    t_on_q: &[f64],
) -> Result<Estimate, DivergenceError> {
    non_empty(t_on_p, t_on_q)?;
    let g = spec.generator;
    let p = spec.parameterization;
    let q_terms: Vec<f64> = t_on_q.iter().map(|&t| -g.f_prime(p.phi(t))).collect();
    let p_terms: Vec<f64> = t_on_p.iter().map(|&t| g.conj_of_fprime(p.phi(t))).collect();
    let (mq, mp) = (mean(&q_terms), mean(&p_terms));
    let value = finite("f-divergence", mq + mp)?;
    let se2 = sample_variance(&q_terms, mq) / q_terms.len() as f64
        + sample_variance(&p_terms, mp) / p_terms.len() as f64;
    Ok(Estimate {
        mean: value,
        stderr: se2.sqrt(),
    })
}

/// `Ê_P[e^T] − Ê_Q[T]`.
pub fn kl_loss(t_on_p: &[f64], t_on_q: &[f64]) -> Result<f64, DivergenceError> {
    non_empty(t_on_p, t_on_q)?;
    let ep = mean(&t_on_p.iter().map(|t| t.exp()).collect::<Vec<_>>());
    finite("kl", ep - mean(t_on_q))
}

/// `(1/α) Ê_Q[e^{αT}] + (1/(1−α)) Ê_P[e^{(α−1)T}]`.
///
/// Its population minimizer is `T = −log(dQ/dP)`, so the network output
/// trained under this loss is an energy and the ratio estimate is `e^{−T}`.
pub fn alpha_loss(t_on_p: &[f64], t_on_q: &[f64], alpha: f64) -> Result<f64, DivergenceError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DivergenceError::InvalidAlpha(alpha));
    }
    non_empty(t_on_p, t_on_q)?;
    let q: Vec<f64> = t_on_q.iter().map(|t| (alpha * t).exp()).collect();
    let p: Vec<f64> = t_on_p.iter().map(|t| ((alpha - 1.0) * t).exp()).collect();
    finite("alpha", mean(&q) / alpha + mean(&p) / (1.0 - alpha))
}

/// Monte Carlo `D_f(Q‖P) ≈ mean f(r)` over ratio values observed on P-samples.
pub fn monte_carlo_df(gen: Generator, ratio_values_on_p: &[f64]) -> Result<f64, DivergenceError> {
    Ok(monte_carlo_df_estimate(gen, ratio_values_on_p)?.mean)
}

pub fn monte_carlo_df_estimate(
    gen: Generator,
    ratio_values_on_p: &[f64],
) -> Result<Estimate, DivergenceError> {
    if ratio_values_on_p.is_empty() {
        return Err(DivergenceError::EmptySample);
    }
    if let Some(&bad) = ratio_values_on_p.iter().find(|r| !(**r > 0.0)) {
        return Err(DivergenceError::NonPositive(bad));
    }
    let fs: Vec<f64> = ratio_values_on_p.iter().map(|&r| gen.f(r)).collect();
    let est = Estimate::from_samples(&fs);
    finite("monte carlo D_f", est.mean)?;
    Ok(est)
}

/// [`kl_loss`] recorded on a tape; `t_on_p`, `t_on_q` are `n × 1` outputs.
pub fn kl_loss_on_tape(tape: &mut Tape, t_on_p: Var, t_on_q: Var) -> Result<Var, AutodiffError> {
    let e = tape.exp(t_on_p)?;
    let ep = tape.mean(e)?;
    let eq = tape.mean(t_on_q)?;
    tape.sub(ep, eq)
}

pub fn alpha_loss_on_tape(
    tape: &mut Tape,
    t_on_p: Var,
    t_on_q: Var,
    alpha: f64,
) -> Result<Var, AutodiffError> {
    let sq = tape.scale(t_on_q, alpha)?;
    let eq = tape.exp(sq)?;
    let mq = tape.mean(eq)?;
    let sp = tape.scale(t_on_p, alpha - 1.0)?;
    let ep = tape.exp(sp)?;
    let mp = tape.mean(ep)?;
    let a = tape.scale(mq, 1.0 / alpha)?;
    let b = tape.scale(mp, 1.0 / (1.0 - alpha))?;
    tape.add(a, b)
}

/// General generator loss on a tape, with the composite derivatives supplied analytically.
pub fn f_loss_on_tape(
    tape: &mut Tape,
    spec: LossSpec,
    t_on_p: Var,
    t_on_q: Var,
) -> Result<Var, AutodiffError> {
    let LossSpec { generator: g, parameterization: p } = spec;
    let q_term = ElementwiseFn {
        name: "neg_f_prime",
        value: Arc::new(move |t| -g.f_prime(p.phi(t))),
        derivative: Arc::new(move |t| -g.f_double_prime(p.phi(t)) * p.dphi_dt(t)),
    };
    let p_term = ElementwiseFn {
        name: "conj_of_f_prime",
        value: Arc::new(move |t| g.conj_of_fprime(p.phi(t))),
        derivative: Arc::new(move |t| g.conj_of_fprime_derivative(p.phi(t)) * p.dphi_dt(t)),
    };
    let a = tape.map(t_on_q, &q_term)?;
    let ma = tape.mean(a)?;
    let b = tape.map(t_on_p, &p_term)?;
    let mb = tape.mean(b)?;
    tape.add(ma, mb)
}

/// The loss a ratio model is trained with.
///
/// Names: `"kl"` is [`kl_loss`], `"alpha"` / `"alpha:<α>"` the
/// exponential α-loss, and any other generator name the general loss under
/// [`Parameterization::LogScale`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Objective {
    #[default]
    Kl,
    Alpha(f64),
    FDivergence(LossSpec),
}

impl Objective {
    pub fn evaluate(&self, t_on_p: &[f64], t_on_q: &[f64]) -> Result<f64, DivergenceError> {
        match *self {
            Self::Kl => kl_loss(t_on_p, t_on_q),
            Self::Alpha(a) => alpha_loss(t_on_p, t_on_q, a),
            Self::FDivergence(spec) => empirical_loss(&spec, t_on_p, t_on_q),
        }
    }

    pub fn record(&self, tape: &mut Tape, t_on_p: Var, t_on_q: Var) -> Result<Var, AutodiffError> {
        match *self {
            Self::Kl => kl_loss_on_tape(tape, t_on_p, t_on_q),
            Self::Alpha(a) => alpha_loss_on_tape(tape, t_on_p, t_on_q, a),
            Self::FDivergence(spec) => f_loss_on_tape(tape, spec, t_on_p, t_on_q),
        }
    }

    pub fn parameterization(&self) -> Parameterization {
        match self {
            Self::Kl => Parameterization::LogScale,
            Self::Alpha(_) => Parameterization::NegLogScale,
            Self::FDivergence(spec) => spec.parameterization,
        }
    }

    pub fn generator(&self) -> Generator {
        match *self {
            Self::Kl => Generator::Kl,
            Self::Alpha(a) => Generator::Alpha(a),
            Self::FDivergence(spec) => spec.generator,
        }
    }

    /// Constant `c` with `objective = empirical_loss(generator) + c`, so that the
    /// population minimum of the objective is `c − D_f(Q‖P)`.
    pub fn offset(&self) -> f64 {
        match *self {
            Self::Kl => 1.0,
            Self::Alpha(a) => 1.0 / (a * (1.0 - a)),
            Self::FDivergence(_) => 0.0,
        }
    }

    pub fn ratio(&self, t: f64) -> f64 {
        self.parameterization().phi(t)
    }

    pub fn energy(&self, t: f64) -> f64 {
        self.parameterization().energy(t)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kl => write!(f, "kl"),
            Self::Alpha(a) => write!(f, "alpha:{a}"),
            Self::FDivergence(spec) => match spec.parameterization {
                Parameterization::LogScale => write!(f, "{}", spec.generator),
                Parameterization::NegLogScale => write!(f, "{}@neg_log", spec.generator),
                Parameterization::Direct => write!(f, "{}@direct", spec.generator),
            },
        }
    }
}

impl FromStr for Objective {
    type Err = DivergenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, param) = match s.split_once('@') {
            Some((n, "neg_log")) => (n, Parameterization::NegLogScale),
            Some((n, "direct")) => (n, Parameterization::Direct),
            Some((n, "log")) => (n, Parameterization::LogScale),
            Some(_) => return Err(DivergenceError::UnknownName(s.to_string())),
            None => (s, Parameterization::LogScale),
        };
        if name != s {
            return Ok(Self::FDivergence(LossSpec {
                generator: name.parse()?,
                parameterization: param,
            }));
        }
        match name.parse::<Generator>()? {
            Generator::Kl => Ok(Self::Kl),
            Generator::Alpha(a) => Ok(Self::Alpha(a)),
            g => Ok(Self::FDivergence(LossSpec::log_scale(g))),
        }
    }
}

impl From<Objective> for String {
    fn from(o: Objective) -> Self {
        o.to_string()
    }
}

impl TryFrom<String> for Objective {
    type Error = DivergenceError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn losses_at_unit_ratio() {
        let zeros = vec![0.0; 7];
        let kl = LossSpec::log_scale(Generator::Kl);
        assert_eq!(empirical_loss(&kl, &zeros, &zeros).unwrap(), 0.0);
        // −f'(1) + f*(f'(1)) = −0 + (1·0 − 0) for Pearson.
        let chi = LossSpec::log_scale(Generator::PearsonChi2);
        assert_eq!(empirical_loss(&chi, &zeros, &zeros).unwrap(), 0.0);
        let gan = LossSpec::log_scale(Generator::Gan);
        assert!((empirical_loss(&gan, &zeros, &zeros).unwrap() - 2.0 * LN2).abs() < 1e-15);
    }

    #[test]
    fn kl_loss_constants() {
        assert_eq!(kl_loss(&[0.0; 4], &[0.0; 3]).unwrap(), 1.0);
        for r in [0.5f64, 1.0, 2.0, 3.0] {
            let c = r.ln();
            let v = kl_loss(&[c; 3], &[c; 5]).unwrap();
            assert!((v - (r - c)).abs() < 1e-14);
            assert!(v >= 1.0 - 1e-15);
        }
    }

    #[test]
    fn alpha_loss_constants() {
        assert_eq!(alpha_loss(&[0.0; 3], &[0.0; 2], 0.5).unwrap(), 4.0);
        let c = 0.8f64;
        let v = alpha_loss(&[c; 2], &[c; 2], 0.5).unwrap();
        assert!((v - (2.0 * (c / 2.0).exp() + 2.0 * (-c / 2.0).exp())).abs() < 1e-14);
        assert!(v > 4.0);
        assert!(alpha_loss(&[0.0], &[0.0], 1.0).is_err());
        assert!(alpha_loss(&[0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!(kl_loss(&[], &[0.0]), Err(DivergenceError::EmptySample)));
        assert!(matches!(kl_loss(&[800.0], &[0.0]), Err(DivergenceError::NonFiniteLoss { .. })));
        assert!(matches!(monte_carlo_df(Generator::Kl, &[1.0, 0.0]), Err(DivergenceError::NonPositive(_))));
        assert_eq!(monte_carlo_df(Generator::PearsonChi2, &[1.0; 10]).unwrap(), 0.0);
    }

    #[test]
    fn objective_names() {
        assert_eq!("kl".parse::<Objective>().unwrap(), Objective::Kl);
        assert_eq!("alpha".parse::<Objective>().unwrap(), "alpha:0.5".parse::<Objective>().unwrap());
        assert_eq!(
            "gan".parse::<Objective>().unwrap(),
            Objective::FDivergence(LossSpec::log_scale(Generator::Gan))
        );
        let o: Objective = "pearson_chi2@direct".parse().unwrap();
        assert_eq!(o.to_string().parse::<Objective>().unwrap(), o);
        assert!("kl@bogus".parse::<Objective>().is_err());
    }

    #[test]
    fn objective_offsets_relate_to_generator_loss() {
        let tp = [0.3, -0.2, 1.1, 0.0];
        let tq = [0.5, -1.0, 0.25];
        for obj in [Objective::Kl, Objective::Alpha(0.5), Objective::Alpha(0.2)] {
            let spec = LossSpec {
                generator: obj.generator(),
                parameterization: obj.parameterization(),
            };
            let direct = obj.evaluate(&tp, &tq).unwrap();
            let general = empirical_loss(&spec, &tp, &tq).unwrap();
            assert!((direct - (general + obj.offset())).abs() < 1e-12, "{obj}");
        }
    }
}
