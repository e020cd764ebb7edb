//! Experiment configuration.
//!
//! Precedence, lowest first: built-in defaults for the chosen scale, the TOML
//! config file, command-line flags. The scale itself is taken from the flag if
//! given, else from the file's `scale` key, else desk.
//!
//! | setting              | desk            | paper                           |
//! |----------------------|-----------------|---------------------------------|
//! | hidden layers        | 3               | 5                               |
//! | hidden width         | 256             | 1024                            |
//! | trials               | 10              | 100                             |
//! | KL grid (d = 5)      | 1, 2, 4         | 1, 2, 4, 6, 8, 10, 12, 14       |
//! | dimension grid       | 10, 25, 50      | 50, 100, 200                    |
//! | training sizes       | 2000, 4000, 8000| 1000, 2000, 4000, 8000, 16000   |
//! | dim-sweep pool / val | 8000 / 5000     | 20000 / 5000                    |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BenchError;
use crate::divergence::Objective;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    KlSweep,
    DimSweep,
    NnBounds,
    SingleRun,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::KlSweep => "kl_sweep",
            Self::DimSweep => "dim_sweep",
            Self::NnBounds => "nn_bounds",
            Self::SingleRun => "single_run",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::KlSweep, Self::DimSweep, Self::NnBounds, Self::SingleRun]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlSweepConfig {
    pub dim: usize,
    pub kl_values: Vec<f64>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimSweepConfig {
    pub kl: f64,
    pub dims: Vec<usize>,
    /// Training sizes; each is a prefix of one pool of `pool_size` rows.
    pub sample_sizes: Vec<usize>,
    pub pool_size: usize,
    pub n_val: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnBoundsConfig {
    pub upper_dims: Vec<usize>,
    pub upper_sizes: Vec<usize>,
    pub kappas: Vec<f64>,
    pub upper_trials: usize,
    /// Evaluate cells with κ > d too, where the bound's hypothesis fails.
    pub allow_kappa_above_dim: bool,
    pub lower_dim: usize,
    pub lower_kl: f64,
    pub lower_p: f64,
    pub lower_sizes: Vec<usize>,
    pub lower_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleRunConfig {
    pub dim: usize,
    pub kl: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub scale: Scale,
    pub seed: u64,
    pub trials: usize,
    pub out_dir: PathBuf,
    /// Worker threads; 0 means one per logical core.
    pub workers: usize,
    pub losses: Vec<Objective>,
    pub p_orders: Vec<f64>,
    /// Mixture modes of the numerator distribution.
    pub modes: usize,
    pub lipschitz_pairs: usize,
    pub network: NetworkConfig,
    pub training: TrainingConfig,
    pub kl_sweep: KlSweepConfig,
    pub dim_sweep: DimSweepConfig,
    pub nn_bounds: NnBoundsConfig,
    pub single_run: SingleRunConfig,
}

impl ExperimentConfig {
    pub fn defaults(scale: Scale) -> Self {
        let desk = scale == Scale::Desk;
        Self {
            experiment: ExperimentKind::SingleRun,
            scale,
            seed: 0,
            trials: if desk { 10 } else { 100 },
            out_dir: PathBuf::from("out"),
            workers: 0,
            losses: vec![Objective::Kl, Objective::Alpha(0.5)],
            p_orders: vec![1.0, 2.0, 3.0],
            modes: 1,
            lipschitz_pairs: 20_000,
            network: NetworkConfig {
                hidden_layers: if desk { 3 } else { 5 },
                width: if desk { 256 } else { 1024 },
            },
            training: TrainingConfig {
                learning_rate: 1e-4,
                batch_size: 128,
                patience_epochs: 3,
                max_epochs: 5000,
                weight_decay: 0.0,
            },
            kl_sweep: KlSweepConfig {
                dim: 5,
                kl_values: if desk {
                    vec![1.0, 2.0, 4.0]
                } else {
                    vec![1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]
                },
                n_train: 10_000,
                n_val: 10_000,
                n_test: 10_000,
            },
            dim_sweep: DimSweepConfig {
                kl: 3.0,
                dims: if desk { vec![10, 25, 50] } else { vec![50, 100, 200] },
                sample_sizes: if desk {
                    vec![2000, 4000, 8000]
                } else {
                    vec![1000, 2000, 4000, 8000, 16000]
                },
                pool_size: if desk { 8000 } else { 20_000 },
                n_val: 5000,
                n_test: 5000,
            },
            nn_bounds: NnBoundsConfig {
                upper_dims: vec![1, 2, 3, 5],
                upper_sizes: vec![1, 4, 16, 64, 256],
                kappas: vec![1.0, 2.0],
                upper_trials: 10_000,
                allow_kappa_above_dim: true,
                lower_dim: 3,
                lower_kl: 0.0,
                lower_p: 1.0,
                lower_sizes: (7..=13).map(|k| 1usize << k).collect(),
                lower_trials: if desk { 2000 } else { 10_000 },
            },
            single_run: SingleRunConfig {
                dim: 5,
                kl: 1.0,
                n_train: 10_000,
                n_val: 10_000,
                n_test: 10_000,
            },
        }
    }

    /// Parses a TOML document over the defaults of its scale (or `scale`,
    /// when given, which wins over the file).
    pub fn from_toml_str(text: &str, scale: Option<Scale>) -> Result<Self, BenchError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        let scale = match scale {
            Some(s) => s,
            None => match user.get("scale") {
                Some(v) => v
                    .clone()
                    .try_into()
                    .map_err(|e: toml::de::Error| BenchError::Config(format!("scale: {e}")))?,
                None => Scale::Desk,
            },
        };
        let mut base = toml::Table::try_from(Self::defaults(scale)).map_err(|e| BenchError::Config(e.to_string()))?;
        merge(&mut base, user);
        base.insert("scale".into(), toml::Value::try_from(scale).map_err(|e| BenchError::Config(e.to_string()))?);
        let cfg: Self = base.try_into().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, scale: Option<Scale>) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, scale)
    }

    pub fn to_toml(&self) -> Result<String, BenchError> {
        toml::to_string(self).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be ≥ 1");
        }
        if self.losses.is_empty() || self.p_orders.is_empty() {
            return bad("losses and p_orders must be non-empty");
        }
        if self.p_orders.iter().any(|p| !(*p >= 1.0)) {
            return bad("p orders must be ≥ 1");
        }
        if self.modes == 0 || self.lipschitz_pairs == 0 {
            return bad("modes and lipschitz_pairs must be ≥ 1");
        }
        if self.network.hidden_layers == 0 || self.network.width == 0 {
            return bad("network needs at least one hidden layer of positive width");
        }
        self.train_config(Objective::Kl, 0).validate().map_err(|e| BenchError::Config(e.to_string()))?;
        let k = &self.kl_sweep;
        if k.kl_values.is_empty() || k.dim == 0 || k.n_train == 0 || k.n_val == 0 || k.n_test == 0 {
            return bad("kl_sweep: grids and sizes must be non-empty and positive");
        }
        let s = &self.dim_sweep;
        if s.dims.is_empty() || s.sample_sizes.is_empty() || s.dims.contains(&0) || s.sample_sizes.contains(&0) {
            return bad("dim_sweep: grids must be non-empty and positive");
        }
        if s.n_val == 0 || s.n_test == 0 {
            return bad("dim_sweep: n_val and n_test must be positive");
        }
        if let Some(n) = s.sample_sizes.iter().find(|n| **n > s.pool_size) {
            return Err(BenchError::Config(format!(
                "dim_sweep: sample size {n} exceeds the generated pool of {}",
                s.pool_size
            )));
        }
        let nn = &self.nn_bounds;
        if nn.upper_dims.is_empty() || nn.upper_sizes.is_empty() || nn.kappas.is_empty() || nn.lower_sizes.is_empty() {
            return bad("nn_bounds: grids must be non-empty");
        }
        if nn.upper_trials < 2 || nn.lower_trials < 2 {
            return bad("nn_bounds: need at least two trials per cell");
        }
        if nn.upper_dims.contains(&0) || nn.upper_sizes.contains(&0) || nn.lower_sizes.contains(&0) || nn.lower_dim == 0 {
            return bad("nn_bounds: dimensions and sizes must be positive");
        }
        if [self.kl_sweep.kl_values.as_slice(), &[self.dim_sweep.kl, nn.lower_kl, self.single_run.kl]]
            .concat()
            .iter()
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return bad("KL values must be finite and ≥ 0");
        }
        let r = &self.single_run;
        if r.dim == 0 || r.n_train == 0 || r.n_val == 0 || r.n_test == 0 {
            return bad("single_run: sizes must be positive");
        }
        Ok(())
    }

    pub fn train_config(&self, objective: Objective, seed: u64) -> TrainConfig {
        TrainConfig {
            objective,
            learning_rate: self.training.learning_rate,
            batch_size: self.training.batch_size,
            patience_epochs: self.training.patience_epochs,
            max_epochs: self.training.max_epochs,
            seed,
            weight_decay: self.training.weight_decay,
        }
    }

    /// SHA-256 over the canonical JSON of everything that affects results
    /// (output directory and worker count excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.workers = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::defaults(Scale::Desk).validate().unwrap();
        ExperimentConfig::defaults(Scale::Paper).validate().unwrap();
    }

    #[test]
    fn file_overrides_defaults() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"kl_sweep\"\ntrials = 2\nlosses = [\"alpha\"]\n[kl_sweep]\nkl_values = [0.5]\n",
            None,
        )
        .unwrap();
        assert_eq!(c.experiment, ExperimentKind::KlSweep);
        assert_eq!(c.trials, 2);
        assert_eq!(c.losses, vec![Objective::Alpha(0.5)]);
        assert_eq!(c.kl_sweep.kl_values, vec![0.5]);
        assert_eq!(c.kl_sweep.dim, 5);
        assert_eq!(c.network.width, 256);
    }

    #[test]
    fn scale_from_file_and_flag() {
        let c = ExperimentConfig::from_toml_str("scale = \"paper\"", None).unwrap();
        assert_eq!(c.network.width, 1024);
        assert_eq!(c.kl_sweep.kl_values.len(), 8);
        let c = ExperimentConfig::from_toml_str("scale = \"paper\"", Some(Scale::Desk)).unwrap();
        assert_eq!(c.network.width, 256);
    }

    #[test]
    fn errors() {
        assert!(ExperimentConfig::from_toml_str("trials = 0", None).is_err());
        assert!(ExperimentConfig::from_toml_str("bogus = 1", None).is_err());
        assert!(ExperimentConfig::from_toml_str("[dim_sweep]\nsample_sizes = [9000]", None).is_err());
        assert!(ExperimentConfig::from_toml_str("[nn_bounds]\nupper_sizes = []", None).is_err());
        assert!(ExperimentConfig::from_toml_str("losses = [\"nope\"]", None).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::defaults(Scale::Desk);
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        b.workers = 3;
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        let c = ExperimentConfig::from_toml_str(&a.to_toml().unwrap(), None).unwrap();
        assert_eq!(c, a);
    }
}
