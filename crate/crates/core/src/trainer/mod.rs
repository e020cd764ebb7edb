//! Mini-batch training of ratio estimators with early stopping.
//!
//! Each optimization step draws one P-batch and one Q-batch of the same size,
//! runs them through the network as a single stacked batch, and takes an Adam
//! step on the chosen objective. An epoch ends when the smaller training set is
//! exhausted. Validation loss is computed full-batch after every epoch; the
//! parameters with the lowest validation loss are returned.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdamConfig, AdamState, AutodiffError, MlpModel, Tape, Tensor};
use crate::divergence::{monte_carlo_df_estimate, DivergenceError, Objective};
use crate::stats::Estimate;
use crate::synthdata::{rng::tags, stream_rng, DataError, SampleSet};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(rename = "loss")]
    pub objective: Objective,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// L2 penalty folded into Adam's gradient. Off by default.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Kl,
            learning_rate: 1e-4,
            batch_size: 128,
            patience_epochs: 3,
            max_epochs: 5000,
            seed: 0,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.patience_epochs == 0 || self.max_epochs == 0 {
            return bad("patience_epochs and max_epochs must be positive".into());
        }
        if self.patience_epochs > self.max_epochs {
            return bad(format!(
                "patience_epochs {} exceeds max_epochs {}",
                self.patience_epochs, self.max_epochs
            ));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be ≥ 0, got {}", self.weight_decay));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    Divergence,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Patience => "patience",
            Self::MaxEpochs => "max_epochs",
            Self::Divergence => "divergence",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// 1-based epoch of the returned snapshot; 0 means the initial parameters.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Validation loss of the parameters before any update.
    pub initial_val_loss: f64,
    pub history: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    /// `best_val_loss − reference`, where the reference is the population
    /// optimum of the objective estimated from true ratios.
    pub val_gap: Option<f64>,
    pub steps: u64,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }
}

/// A trained network together with the objective that fixes how its raw
/// output maps to a ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub objective: Objective,
}

impl TrainedModel {
    pub fn new(model: MlpModel, objective: Objective) -> Self {
        Self { model, objective }
    }

    /// Raw network outputs `T(x)`.
    pub fn predict_raw(&self, points: &Tensor) -> Result<Vec<f64>, TrainError> {
        check_dim(self.model.input_dim(), points)?;
        Ok(self.model.predict(points)?)
    }

    pub fn predict_ratio(&self, points: &Tensor) -> Result<Vec<f64>, TrainError> {
        let p = self.objective.parameterization();
        self.predict_raw(points)?
            .into_iter()
            .map(|t| {
                let r = p.phi(t);
                if r.is_finite() {
                    Ok(r)
                } else {
                    Err(TrainError::Autodiff(AutodiffError::NonFinite { op: "predict_ratio" }))
                }
            })
            .collect()
    }

    /// `−log φ(x)`.
    pub fn predict_energy(&self, points: &Tensor) -> Result<Vec<f64>, TrainError> {
        let p = self.objective.parameterization();
        Ok(self.predict_raw(points)?.into_iter().map(|t| p.energy(t)).collect())
    }

    pub fn predict_ratio_at(&self, x: &[f64]) -> Result<f64, TrainError> {
        let t = Tensor::matrix(1, x.len(), x.to_vec())?;
        Ok(self.predict_ratio(&t)?[0])
    }
}

fn check_dim(expected: usize, points: &Tensor) -> Result<(), TrainError> {
    let got = points.cols();
    if points.shape().len() != 2 || got != expected {
        return Err(TrainError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Population optimum of `objective`, `offset − D_f(Q‖P)`, estimated from true
/// ratio values at P-samples.
pub fn optimal_loss(objective: &Objective, ratios_on_p: &[f64]) -> Result<Estimate, TrainError> {
    let df = monte_carlo_df_estimate(objective.generator(), ratios_on_p)?;
    Ok(Estimate {
        mean: objective.offset() - df.mean,
        stderr: df.stderr,
    })
}

/// [`train_with_reference`] without a reference value.
pub fn train(
    model: MlpModel,
    train_p: &SampleSet,
    train_q: &SampleSet,
    val_p: &SampleSet,
    val_q: &SampleSet,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, TrainReport), TrainError> {
    train_with_reference(model, train_p, train_q, val_p, val_q, cfg, None)
}

/// Trains `model` and, if `reference` (see [`optimal_loss`]) is given, fills
/// in the report's `val_gap`.
pub fn train_with_reference(
    mut model: MlpModel,
    train_p: &SampleSet,
    train_q: &SampleSet,
    val_p: &SampleSet,
    val_q: &SampleSet,
    cfg: &TrainConfig,
    reference: Option<f64>,
) -> Result<(TrainedModel, TrainReport), TrainError> {
    cfg.validate()?;
    let d = model.input_dim();
    for (name, set) in [("train_p", train_p), ("train_q", train_q), ("val_p", val_p), ("val_q", val_q)] {
        if set.is_empty() {
            return Err(TrainError::EmptySet(name));
        }
        check_dim(d, &set.points)?;
    }
    let objective = cfg.objective;
    let val_loss = |m: &MlpModel| -> Result<f64, TrainError> {
        let tp = m.predict(&val_p.points)?;
        let tq = m.predict(&val_q.points)?;
        Ok(objective.evaluate(&tp, &tq)?)
    };

    let initial_val_loss = val_loss(&model)?;
    let mut best = model.clone();
    let mut best_val = initial_val_loss;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
        model.params(),
    )?;
    let mut rng = stream_rng(cfg.seed, &[tags::SHUFFLE]);
    let n = train_p.len().min(train_q.len());
    let mut idx_p: Vec<usize> = (0..train_p.len()).collect();
    let mut idx_q: Vec<usize> = (0..train_q.len()).collect();

    'epochs: for epoch in 1..=cfg.max_epochs {
        idx_p.shuffle(&mut rng);
        idx_q.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for start in (0..n).step_by(cfg.batch_size) {
            let end = (start + cfg.batch_size).min(n);
            match train_step(&mut model, &mut adam, &objective, train_p, train_q, &idx_p[start..end], &idx_q[start..end]) {
                Ok(loss) => {
                    loss_sum += loss;
                    steps += 1;
                }
                Err(e) if is_divergence(&e) => {
                    stop_reason = StopReason::Divergence;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let v = match val_loss(&model) {
            Ok(v) => v,
            Err(e) if is_divergence(&e) => {
                stop_reason = StopReason::Divergence;
                break 'epochs;
            }
            Err(e) => return Err(e),
        };
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / steps as f64,
            val_loss: v,
        });
        if v < best_val {
            best_val = v;
            best = model.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience_epochs {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }

    let report = TrainReport {
        epochs_run: history.len(),
        best_epoch,
        best_val_loss: best_val,
        initial_val_loss,
        history,
        stop_reason,
        val_gap: reference.map(|r| best_val - r),
        steps: adam.steps_taken(),
    };
    Ok((TrainedModel::new(best, objective), report))
}

fn is_divergence(e: &TrainError) -> bool {
    matches!(
        e,
        TrainError::Autodiff(AutodiffError::NonFinite { .. }) | TrainError::Divergence(DivergenceError::NonFiniteLoss { .. })
    )
}

fn train_step(
    model: &mut MlpModel,
    adam: &mut AdamState,
    objective: &Objective,
    train_p: &SampleSet,
    train_q: &SampleSet,
    rows_p: &[usize],
    rows_q: &[usize],
) -> Result<f64, TrainError> {
    let b = rows_p.len();
    let batch = Tensor::vstack(&train_p.points.gather_rows(rows_p), &train_q.points.gather_rows(rows_q))?;
    let mut tape = Tape::new();
    let fwd = model.forward(&mut tape, &batch)?;
    let t_p = tape.slice_rows(fwd.output, 0, b)?;
    let t_q = tape.slice_rows(fwd.output, b, 2 * b)?;
    let loss = objective.record(&mut tape, t_p, t_q)?;
    let value = tape.value(loss)?.data()[0];
    let grads = tape.backward(loss)?.collect(&fwd.params)?;
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(AutodiffError::NonFinite { op: "backward" }.into());
    }
    adam.step(&mut model.params_mut(), &grads)?;
    Ok(value)
}

/// Largest `|f(y) − f(x)| / ‖y − x‖∞` over `n_pairs` random pairs of rows;
/// coincident pairs are skipped. A lower bound on the Lipschitz constant of
/// `f` under the max norm.
pub fn estimate_lipschitz<F, R>(f: F, samples: &Tensor, n_pairs: usize, rng: &mut R) -> Result<f64, TrainError>
where
    F: Fn(&Tensor) -> Result<Vec<f64>, TrainError>,
    R: Rng + ?Sized,
{
    let n = samples.rows();
    if n < 2 {
        return Err(TrainError::Config("need at least two samples".into()));
    }
    let values = f(samples)?;
    if values.len() != n {
        return Err(TrainError::DimensionMismatch {
            expected: n,
            got: values.len(),
        });
    }
    let mut best: f64 = 0.0;
    for _ in 0..n_pairs {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let dist = samples
            .row(i)
            .iter()
            .zip(samples.row(j))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dist == 0.0 {
            continue;
        }
        let q = (values[i] - values[j]).abs() / dist;
        if q.is_finite() {
            best = best.max(q);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{sample_p, sample_q, MixtureSpec, Split};

    fn sets(spec: &MixtureSpec, n: usize, seed: u64) -> [SampleSet; 4] {
        let mut r = stream_rng(seed, &[1]);
        [
            sample_p(spec, n, &mut r).unwrap(),
            sample_q(spec, n, &mut r).unwrap(),
            sample_p(spec, n, &mut r).unwrap().with_split(Split::Val),
            sample_q(spec, n, &mut r).unwrap().with_split(Split::Val),
        ]
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { patience_epochs: 10, max_epochs: 5, ..Default::default() },
            TrainConfig { weight_decay: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let c: TrainConfig = toml::from_str("loss = \"alpha:0.5\"\nseed = 3").unwrap();
        assert_eq!(c.objective, Objective::Alpha(0.5));
        assert_eq!(c.batch_size, 128);
    }

    #[test]
    fn zero_model_predicts_one() {
        let m = TrainedModel::new(MlpModel::zeros(&[2, 4, 1]).unwrap(), Objective::Kl);
        let x = Tensor::matrix(3, 2, vec![1.0, 2.0, -3.0, 0.5, 0.0, 9.0]).unwrap();
        assert_eq!(m.predict_ratio(&x).unwrap(), vec![1.0; 3]);
        assert!(m.predict_ratio(&Tensor::matrix(1, 3, vec![0.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn short_run_keeps_best_snapshot() {
        let spec = MixtureSpec::new(2, 1, 0.5, 3).unwrap();
        let [tp, tq, vp, vq] = sets(&spec, 256, 3);
        let model = MlpModel::new(&[2, 16, 16, 1], &mut stream_rng(3, &[tags::INIT])).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 64,
            max_epochs: 30,
            seed: 3,
            ..Default::default()
        };
        let (trained, rep) = train(model, &tp, &tq, &vp, &vq, &cfg).unwrap();
        assert_eq!(rep.history.len(), rep.epochs_run);
        assert!(rep.history.iter().all(|h| rep.best_val_loss <= h.val_loss));
        let tpv = trained.predict_raw(&vp.points).unwrap();
        let tqv = trained.predict_raw(&vq.points).unwrap();
        assert_eq!(Objective::Kl.evaluate(&tpv, &tqv).unwrap(), rep.best_val_loss);
        if rep.stop_reason == StopReason::Patience {
            assert!(rep.best_epoch < rep.epochs_run);
        }
        if rep.stop_reason != StopReason::Divergence {
            assert_eq!(rep.steps as usize, rep.epochs_run * 4);
        }
    }

    #[test]
    fn dimension_checks() {
        let spec = MixtureSpec::new(2, 1, 0.5, 3).unwrap();
        let [tp, tq, vp, vq] = sets(&spec, 8, 1);
        let model = MlpModel::zeros(&[3, 4, 1]).unwrap();
        assert!(matches!(
            train(model, &tp, &tq, &vp, &vq, &TrainConfig::default()),
            Err(TrainError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lipschitz_of_affine_and_constant() {
        let xs = Tensor::matrix(200, 1, (0..200).map(|i| i as f64 * 0.37 - 20.0).collect()).unwrap();
        let mut rng = stream_rng(0, &[tags::LIPSCHITZ]);
        let affine = |t: &Tensor| -> Result<Vec<f64>, TrainError> { Ok(t.data().iter().map(|x| -2.5 * x + 1.0).collect()) };
        let l = estimate_lipschitz(affine, &xs, 500, &mut rng).unwrap();
        assert!((l - 2.5).abs() < 1e-12);
        let constant = |t: &Tensor| -> Result<Vec<f64>, TrainError> { Ok(vec![4.0; t.rows()]) };
        assert_eq!(estimate_lipschitz(constant, &xs, 500, &mut rng).unwrap(), 0.0);
        let one = Tensor::matrix(1, 1, vec![0.0]).unwrap();
        assert!(estimate_lipschitz(constant, &one, 5, &mut rng).is_err());
    }
}
