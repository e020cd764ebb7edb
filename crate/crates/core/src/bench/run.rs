//! Sweep drivers.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::BenchError;
use crate::analysis::{
    evaluate, nn_moment_lower_check, nn_moment_upper_check, nn_moment_upper_estimate, EvalInputs, EvalReport,
    NnDomain, NnLowerCheck, NnMomentEstimate, Verdict,
};
use crate::autodiff::MlpModel;
use crate::divergence::Objective;
use crate::stats::{median, quantile};
use crate::synthdata::rng::tags;
use crate::synthdata::{sample_p, sample_q, stream_rng, MixtureSpec, SampleSet, Source, Split};
use crate::trainer::{optimal_loss, train_with_reference, StopReason, TrainReport, TrainedModel};

pub const SCHEMA_VERSION: u32 = 1;
/// P-samples behind the Monte Carlo reference for `val_gap`.
pub const REFERENCE_DRAWS: usize = 100_000;

/// One synthetic problem at one training size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub dim: usize,
    pub kl: f64,
    pub modes: usize,
    pub n_train: usize,
    /// Rows drawn for training; `n_train` is a prefix of this pool.
    pub pool: usize,
    pub n_val: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub loss: String,
    pub kl: f64,
    pub d: usize,
    pub n_train: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    Diverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop_reason: StopReason,
    pub val_gap: Option<f64>,
}

impl From<&TrainReport> for TrainSummary {
    fn from(r: &TrainReport) -> Self {
        Self {
            epochs_run: r.epochs_run,
            best_epoch: r.best_epoch,
            best_val_loss: r.best_val_loss,
            stop_reason: r.stop_reason,
            val_gap: r.val_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub key: CellKey,
    pub trial: usize,
    pub status: TrialStatus,
    pub error: Option<String>,
    pub train: Option<TrainSummary>,
    pub eval: Option<EvalReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Quartiles {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            median: median(xs),
            q25: quantile(xs, 0.25),
            q75: quantile(xs, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub key: CellKey,
    pub completed: usize,
    pub diverged: usize,
    pub failed: usize,
    /// Written to `timing.csv` only, so the JSON record stays reproducible.
    #[serde(skip)]
    pub wall_clock_s: f64,
    /// `(p, quartiles of the L_p error)` per order.
    pub lp: Vec<(f64, Quartiles)>,
    /// Quartiles of `|val_gap|`.
    pub abs_val_gap: Option<Quartiles>,
}

impl CellSummary {
    pub fn lp_median(&self, p: f64) -> Option<f64> {
        self.lp.iter().find(|(q, _)| *q == p).map(|(_, s)| s.median)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnUpperCell {
    pub within_hypothesis: bool,
    pub estimate: NnMomentEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnBoundsRecord {
    pub upper: Vec<NnUpperCell>,
    pub lower: NnLowerCheck,
}

impl NnBoundsRecord {
    /// Every upper cell passes and the lower check did not fail.
    pub fn all_pass(&self) -> bool {
        self.upper.iter().all(|c| c.estimate.verdict == Verdict::Pass) && self.lower.verdict != Verdict::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: ExperimentKind,
    pub schema_version: u32,
    pub config_hash: String,
    pub trials: Vec<TrialRecord>,
    pub cells: Vec<CellSummary>,
    pub nn: Option<NnBoundsRecord>,
}

impl RunRecord {
    pub fn cell(&self, loss: &str, kl: f64, d: usize, n_train: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.key.loss == loss && c.key.kl == kl && c.key.d == d && c.key.n_train == n_train)
    }

    pub fn reports(&self) -> impl Iterator<Item = &EvalReport> {
        self.trials.iter().filter_map(|t| t.eval.as_ref())
    }
}

fn trial_seed(master: u64, trial: usize) -> u64 {
    // Distinct per trial, shared by every cell so sweeps compare like with like.
    stream_rng(master, &[0x7E1A1, trial as u64]).random()
}

/// Data for one trial. Streams depend on `(master, trial, dim)` only, so the
/// same trial uses the same noise across KL values, losses and sizes.
pub struct TrialData {
    pub spec: MixtureSpec,
    pub train_p: SampleSet,
    pub train_q: SampleSet,
    pub val_p: SampleSet,
    pub val_q: SampleSet,
    pub test_p: SampleSet,
}

pub fn trial_data(master: u64, trial: usize, problem: &Problem) -> Result<TrialData, BenchError> {
    let seed = trial_seed(master, trial);
    let spec = MixtureSpec::new(problem.dim, problem.modes, problem.kl, seed)?;
    let draw = |split: Split, source: Source, n: usize| -> Result<SampleSet, BenchError> {
        let mut rng = stream_rng(master, &[trial as u64, problem.dim as u64, split.tag(), source.tag()]);
        let set = match source {
            Source::P => sample_p(&spec, n, &mut rng)?,
            Source::Q => sample_q(&spec, n, &mut rng)?,
        };
        Ok(set.with_split(split))
    };
    let pool_p = draw(Split::Train, Source::P, problem.pool)?;
    let pool_q = draw(Split::Train, Source::Q, problem.pool)?;
    Ok(TrialData {
        train_p: pool_p.head(problem.n_train)?,
        train_q: pool_q.head(problem.n_train)?,
        val_p: draw(Split::Val, Source::P, problem.n_val)?,
        val_q: draw(Split::Val, Source::Q, problem.n_val)?,
        test_p: draw(Split::Test, Source::P, problem.n_test)?,
        spec,
    })
}

pub struct TrialOutput {
    pub model: TrainedModel,
    pub report: TrainReport,
    pub eval: EvalReport,
}

/// Generates data, trains and evaluates one estimator.
pub fn run_trial(cfg: &ExperimentConfig, problem: &Problem, loss: Objective, trial: usize) -> Result<TrialOutput, BenchError> {
    let data = trial_data(cfg.seed, trial, problem)?;
    let d = problem.dim as u64;
    let widths = MlpModel::widths_for(problem.dim, cfg.network.hidden_layers, cfg.network.width);
    let model = MlpModel::new(&widths, &mut stream_rng(cfg.seed, &[tags::INIT, trial as u64, d]))?;

    let mut mc = stream_rng(cfg.seed, &[tags::MONTE_CARLO, trial as u64, d]);
    let ref_points = sample_p(&data.spec, REFERENCE_DRAWS, &mut mc)?;
    let reference = optimal_loss(&loss, &data.spec.true_ratios(&ref_points.points)?)?;

    let tcfg = cfg.train_config(loss, trial_seed(cfg.seed, trial));
    let (trained, report) = train_with_reference(
        model,
        &data.train_p,
        &data.train_q,
        &data.val_p,
        &data.val_q,
        &tcfg,
        Some(reference.mean),
    )?;
    let eval = evaluate(
        &trained,
        &data.spec,
        &EvalInputs {
            diag_sets: &[&data.train_p, &data.train_q],
            test_p: &data.test_p,
            n_train: problem.n_train,
            seed: trial_seed(cfg.seed, trial),
            p_orders: &cfg.p_orders,
            lipschitz_pairs: cfg.lipschitz_pairs,
        },
        &mut stream_rng(cfg.seed, &[tags::LIPSCHITZ, trial as u64, d]),
    )?;
    Ok(TrialOutput {
        model: trained,
        report,
        eval,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, BenchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Runtime(e.to_string()))
}

fn run_cells(cfg: &ExperimentConfig, kind: ExperimentKind, cells: Vec<(Problem, Objective)>) -> Result<RunRecord, BenchError> {
    let pool = pool(cfg.workers)?;
    let mut trials = Vec::new();
    let mut summaries = Vec::new();
    for (problem, loss) in cells {
        let key = CellKey {
            loss: loss.to_string(),
            kl: problem.kl,
            d: problem.dim,
            n_train: problem.n_train,
        };
        let start = Instant::now();
        let records: Vec<TrialRecord> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| match run_trial(cfg, &problem, loss, t) {
                    Ok(out) => TrialRecord {
                        key: key.clone(),
                        trial: t,
                        status: if out.report.stop_reason == StopReason::Divergence {
                            TrialStatus::Diverged
                        } else {
                            TrialStatus::Completed
                        },
                        error: None,
                        train: Some(TrainSummary::from(&out.report)),
                        eval: Some(out.eval),
                    },
                    Err(e) => TrialRecord {
                        key: key.clone(),
                        trial: t,
                        status: TrialStatus::Failed,
                        error: Some(e.to_string()),
                        train: None,
                        eval: None,
                    },
                })
                .collect()
        });
        let summary = summarize(&key, &records, &cfg.p_orders, start.elapsed().as_secs_f64())?;
        summaries.push(summary);
        trials.extend(records);
    }
    Ok(RunRecord {
        experiment: kind,
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        trials,
        cells: summaries,
        nn: None,
    })
}

fn summarize(key: &CellKey, records: &[TrialRecord], p_orders: &[f64], wall: f64) -> Result<CellSummary, BenchError> {
    let done: Vec<&TrialRecord> = records.iter().filter(|r| r.status == TrialStatus::Completed).collect();
    let count = |s| records.iter().filter(|r| r.status == s).count();
    if done.is_empty() {
        let first_error = records.iter().find_map(|r| r.error.clone()).unwrap_or_else(|| "all trials diverged".into());
        return Err(BenchError::EmptyCell {
            cell: format!("{key:?}"),
            detail: first_error,
        });
    }
    let lp = p_orders
        .iter()
        .map(|&p| {
            let xs: Vec<f64> = done.iter().filter_map(|r| r.eval.as_ref()?.lp(p)).collect();
            (p, Quartiles::of(&xs))
        })
        .collect();
    let gaps: Vec<f64> = done
        .iter()
        .filter_map(|r| r.train.as_ref()?.val_gap.map(f64::abs))
        .collect();
    Ok(CellSummary {
        key: key.clone(),
        completed: done.len(),
        diverged: count(TrialStatus::Diverged),
        failed: count(TrialStatus::Failed),
        wall_clock_s: wall,
        lp,
        abs_val_gap: (!gaps.is_empty()).then(|| Quartiles::of(&gaps)),
    })
}

/// L_p error against KL at fixed dimension and size, per loss.
pub fn run_kl_sweep(cfg: &ExperimentConfig) -> Result<RunRecord, BenchError> {
    cfg.validate()?;
    let k = &cfg.kl_sweep;
    let mut cells = Vec::new();
    for &kl in &k.kl_values {
        for &loss in &cfg.losses {
            cells.push((
                Problem {
                    dim: k.dim,
                    kl,
                    modes: cfg.modes,
                    n_train: k.n_train,
                    pool: k.n_train,
                    n_val: k.n_val,
                    n_test: k.n_test,
                },
                loss,
            ));
        }
    }
    run_cells(cfg, ExperimentKind::KlSweep, cells)
}

/// L_p error against training size, per dimension and loss.
pub fn run_dim_sweep(cfg: &ExperimentConfig) -> Result<RunRecord, BenchError> {
    cfg.validate()?;
    let s = &cfg.dim_sweep;
    let mut cells = Vec::new();
    for &dim in &s.dims {
        for &n in &s.sample_sizes {
            for &loss in &cfg.losses {
                cells.push((
                    Problem {
                        dim,
                        kl: s.kl,
                        modes: cfg.modes,
                        n_train: n,
                        pool: s.pool_size,
                        n_val: s.n_val,
                        n_test: s.n_test,
                    },
                    loss,
                ));
            }
        }
    }
    run_cells(cfg, ExperimentKind::DimSweep, cells)
}

/// Upper-bound grid on the unit cube plus the lower-bound trend.
pub fn run_nn_bounds(cfg: &ExperimentConfig) -> Result<RunRecord, BenchError> {
    cfg.validate()?;
    let nn = &cfg.nn_bounds;
    let mut grid = Vec::new();
    for &d in &nn.upper_dims {
        for &n in &nn.upper_sizes {
            for &kappa in &nn.kappas {
                grid.push((d, n, kappa));
            }
        }
    }
    let pool = pool(cfg.workers)?;
    let upper = pool.install(|| {
        grid.par_iter()
            .map(|&(d, n, kappa)| {
                let mut rng = stream_rng(cfg.seed, &[0x99, d as u64, n as u64, kappa.to_bits()]);
                let domain = NnDomain::UnitCube(d);
                let within = kappa <= d as f64;
                let estimate = if within {
                    nn_moment_upper_check(&domain, n, kappa, nn.upper_trials, &mut rng)?
                } else if nn.allow_kappa_above_dim {
                    nn_moment_upper_estimate(&domain, n, kappa, nn.upper_trials, &mut rng)?
                } else {
                    return Ok(None);
                };
                Ok(Some(NnUpperCell {
                    within_hypothesis: within,
                    estimate,
                }))
            })
            .collect::<Result<Vec<_>, BenchError>>()
    })?;
    let spec = MixtureSpec::new(nn.lower_dim, cfg.modes, nn.lower_kl, cfg.seed)?;
    let lower = nn_moment_lower_check(
        &spec,
        &nn.lower_sizes,
        nn.lower_p,
        nn.lower_trials,
        &mut stream_rng(cfg.seed, &[0x98]),
    )?;
    Ok(RunRecord {
        experiment: ExperimentKind::NnBounds,
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        trials: Vec::new(),
        cells: Vec::new(),
        nn: Some(NnBoundsRecord {
            upper: upper.into_iter().flatten().collect(),
            lower,
        }),
    })
}

/// One dataset, one training, one evaluation with the first configured loss.
pub fn single_run(cfg: &ExperimentConfig) -> Result<(EvalReport, TrainReport), BenchError> {
    cfg.validate()?;
    let r = &cfg.single_run;
    let problem = Problem {
        dim: r.dim,
        kl: r.kl,
        modes: cfg.modes,
        n_train: r.n_train,
        pool: r.n_train,
        n_val: r.n_val,
        n_test: r.n_test,
    };
    let out = run_trial(cfg, &problem, cfg.losses[0], 0)?;
    Ok((out.eval, out.report))
}
