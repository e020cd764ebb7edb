//! Convex generators of f-divergences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DivergenceError;

pub const DEFAULT_ALPHA: f64 = 0.5;

/// A twice (in fact three times) differentiable convex `f` on `(0, ∞)`.
///
/// `conj_of_fprime(u)` is the conjugate evaluated at the slope, `f*(f'(u))`,
/// which by the Legendre identity equals `u·f'(u) − f(u)`. The closed forms
/// below are coded independently of that identity so it can be tested.
///
/// Every generator here satisfies `f'' > 0` on `(0, ∞)`. Whether
/// `E_P[f''(dQ/dP)]` is finite depends on the pair `(P, Q)`, not on `f` alone:
/// for the Gaussian shift problems in [`crate::synthdata`] it is finite for
/// every variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Generator {
    /// `u log u`.
    Kl,
    /// `(u − 1)²`.
    PearsonChi2,
    /// `(√u − 1)²`.
    SquaredHellinger,
    /// `u log u − (u + 1) log(u + 1)`. Unlike the others, `f(1) = −2 log 2`.
    Gan,
    /// `(u − u^{1−α}) / (α(1 − α))` for `α ∈ (0, 1)`; the generator whose
    /// variational loss is the exponential α-loss.
    Alpha(f64),
}

impl Generator {
    pub fn alpha(alpha: f64) -> Result<Self, DivergenceError> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self::Alpha(alpha))
        } else {
            Err(DivergenceError::InvalidAlpha(alpha))
        }
    }

    pub fn all_default() -> [Generator; 5] {
        [
            Self::Kl,
            Self::PearsonChi2,
            Self::SquaredHellinger,
            Self::Gan,
            Self::Alpha(DEFAULT_ALPHA),
        ]
    }

    pub fn f(&self, u: f64) -> f64 {
        match *self {
            Self::Kl => u * u.ln(),
            Self::PearsonChi2 => (u - 1.0).powi(2),
            Self::SquaredHellinger => (u.sqrt() - 1.0).powi(2),
            Self::Gan => u * u.ln() - (u + 1.0) * u.ln_1p(),
            Self::Alpha(a) => (u - u.powf(1.0 - a)) / (a * (1.0 - a)),
        }
    }

    pub fn f_prime(&self, u: f64) -> f64 {
        match *self {
            Self::Kl => u.ln() + 1.0,
            Self::PearsonChi2 => 2.0 * u - 2.0,
            Self::SquaredHellinger => 1.0 - u.powf(-0.5),
            Self::Gan => -(1.0 / u).ln_1p(),
            Self::Alpha(a) => 1.0 / (a * (1.0 - a)) - u.powf(-a) / a,
        }
    }

    pub fn f_double_prime(&self, u: f64) -> f64 {
        match *self {
            Self::Kl => 1.0 / u,
            Self::PearsonChi2 => 2.0,
            Self::SquaredHellinger => 0.5 * u.powf(-1.5),
            Self::Gan => 1.0 / (u * (u + 1.0)),
            Self::Alpha(a) => u.powf(-a - 1.0),
        }
    }

    pub fn f_triple_prime(&self, u: f64) -> f64 {
        match *self {
            Self::Kl => -1.0 / (u * u),
            Self::PearsonChi2 => 0.0,
            Self::SquaredHellinger => -0.75 * u.powf(-2.5),
            Self::Gan => -(2.0 * u + 1.0) / (u * u * (u + 1.0).powi(2)),
            Self::Alpha(a) => -(a + 1.0) * u.powf(-a - 2.0),
        }
    }

    /// `f*(f'(u))`.
    pub fn conj_of_fprime(&self, u: f64) -> f64 {
        match *self {
            Self::Kl => u,
            Self::PearsonChi2 => u * u - 1.0,
            Self::SquaredHellinger => u.sqrt() - 1.0,
            Self::Gan => u.ln_1p(),
            Self::Alpha(a) => u.powf(1.0 - a) / (1.0 - a),
        }
    }

    /// `d/du f*(f'(u)) = u·f''(u)`.
    pub fn conj_of_fprime_derivative(&self, u: f64) -> f64 {
        u * self.f_double_prime(u)
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kl => write!(f, "kl"),
            Self::PearsonChi2 => write!(f, "pearson_chi2"),
            Self::SquaredHellinger => write!(f, "squared_hellinger"),
            Self::Gan => write!(f, "gan"),
            Self::Alpha(a) => write!(f, "alpha:{a}"),
        }
    }
}

impl FromStr for Generator {
    type Err = DivergenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "kl" => Ok(Self::Kl),
            "pearson_chi2" => Ok(Self::PearsonChi2),
            "squared_hellinger" => Ok(Self::SquaredHellinger),
            "gan" => Ok(Self::Gan),
            "alpha" => Ok(Self::Alpha(DEFAULT_ALPHA)),
            other => match other.strip_prefix("alpha:") {
                Some(v) => {
                    let a: f64 = v
                        .parse()
                        .map_err(|_| DivergenceError::UnknownName(other.to_string()))?;
                    Self::alpha(a)
                }
                None => Err(DivergenceError::UnknownName(other.to_string())),
            },
        }
    }
}

impl From<Generator> for String {
    fn from(g: Generator) -> Self {
        g.to_string()
    }
}

impl TryFrom<String> for Generator {
    type Error = DivergenceError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// How raw network outputs `T` are mapped to positive ratio values `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// `φ = e^T`, so `T` is the log-ratio.
    LogScale,
    /// `φ = e^{−T}`, so `T` is the energy `−log φ`.
    NegLogScale,
    /// `φ = softplus(T) + DIRECT_FLOOR`.
    Direct,
}

pub const DIRECT_FLOOR: f64 = 1e-6;

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

impl Parameterization {
    pub fn phi(&self, t: f64) -> f64 {
        match self {
            Self::LogScale => t.exp(),
            Self::NegLogScale => (-t).exp(),
            Self::Direct => softplus(t) + DIRECT_FLOOR,
        }
    }

    pub fn dphi_dt(&self, t: f64) -> f64 {
        match self {
            Self::LogScale => t.exp(),
            Self::NegLogScale => -(-t).exp(),
            Self::Direct => 1.0 / (1.0 + (-t).exp()),
        }
    }

    /// `−log φ(t)`.
    pub fn energy(&self, t: f64) -> f64 {
        match self {
            Self::LogScale => -t,
            Self::NegLogScale => t,
            Self::Direct => -self.phi(t).ln(),
        }
    }
}

/// A generator together with the output parameterization it is trained under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub generator: Generator,
    pub parameterization: Parameterization,
}

impl LossSpec {
    pub fn log_scale(generator: Generator) -> Self {
        Self {
            generator,
            parameterization: Parameterization::LogScale,
        }
    }
}
