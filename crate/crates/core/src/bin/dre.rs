//! Command-line entry point. Exit codes: 0 success, 2 configuration error,
//! 3 runtime failure, 4 a bound check failed (`verify-bounds`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dre_core::analysis::{evaluate, EvalInputs};
use dre_core::autodiff::checkpoint;
use dre_core::bench::{
    plot_file, run_dim_sweep, run_kl_sweep, run_nn_bounds, run_trial, single_run, trial_data, write_run,
    BenchError, ExperimentConfig, ExperimentKind, Problem, RunRecord, Scale,
};
use dre_core::divergence::Objective;
use dre_core::synthdata::{rng::tags, save_dataset, stream_rng};
use dre_core::trainer::TrainedModel;

#[derive(Parser)]
#[command(name = "dre", version, about = "Density-ratio estimation experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true, conflicts_with = "paper_scale")]
    desk_scale: bool,
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Loss name, e.g. `kl`, `alpha`, `alpha:0.3`, `pearson_chi2`.
    #[arg(long, global = true)]
    loss: Option<String>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the single-run datasets (CSV plus spec sidecar).
    Generate,
    /// Train one estimator on the single-run problem and save it.
    Train,
    /// Evaluate a saved estimator, or run generate+train+eval when no model is given.
    Eval {
        /// Directory written by `train`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// L_p error against KL divergence.
    SweepKl,
    /// L_p error against training size for several dimensions.
    SweepDim,
    /// Nearest-neighbor moment bound checks.
    VerifyBounds,
    /// Re-render the SVG of a summary CSV.
    Plot {
        summary: PathBuf,
        /// Output file (default: the summary path with extension `svg`).
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn resolve(c: &Common, kind: ExperimentKind) -> Result<ExperimentConfig, BenchError> {
    let scale = if c.paper_scale {
        Some(Scale::Paper)
    } else if c.desk_scale {
        Some(Scale::Desk)
    } else {
        None
    };
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p, scale)?,
        None => ExperimentConfig::defaults(scale.unwrap_or(Scale::Desk)),
    };
    cfg.experiment = kind;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(l) = &c.loss {
        let obj: Objective = l.parse().map_err(|e| BenchError::Config(format!("--loss: {e}")))?;
        cfg.losses = vec![obj];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn single_problem(cfg: &ExperimentConfig) -> Problem {
    let r = &cfg.single_run;
    Problem {
        dim: r.dim,
        kl: r.kl,
        modes: cfg.modes,
        n_train: r.n_train,
        pool: r.n_train,
        n_val: r.n_val,
        n_test: r.n_test,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), BenchError> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn finish_sweep(record: RunRecord, cfg: &ExperimentConfig) -> Result<(), BenchError> {
    for path in write_run(&record, &cfg.p_orders, &cfg.out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, BenchError> {
    let c = &cli.common;
    match cli.command {
        Command::Generate => {
            let cfg = resolve(c, ExperimentKind::SingleRun)?;
            let data = trial_data(cfg.seed, 0, &single_problem(&cfg))?;
            let dir = cfg.out_dir.join("data");
            std::fs::create_dir_all(&dir)?;
            for (name, set) in [
                ("train_p", &data.train_p),
                ("train_q", &data.train_q),
                ("val_p", &data.val_p),
                ("val_q", &data.val_q),
                ("test_p", &data.test_p),
            ] {
                let path = dir.join(format!("{name}.csv"));
                save_dataset(&path, set, &data.spec)?;
                println!("{}", path.display());
            }
        }
        Command::Train => {
            let cfg = resolve(c, ExperimentKind::SingleRun)?;
            let out = run_trial(&cfg, &single_problem(&cfg), cfg.losses[0], 0)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            checkpoint::save(&out.model.model, &cfg.out_dir.join("model.json"))?;
            std::fs::write(cfg.out_dir.join("loss.txt"), format!("{}\n", out.model.objective))?;
            write_json(&cfg.out_dir.join("train_report.json"), &out.report)?;
            println!("{}", out.report.to_json()?);
        }
        Command::Eval { model } => {
            let cfg = resolve(c, ExperimentKind::SingleRun)?;
            let report = match model {
                None => single_run(&cfg)?.0,
                Some(dir) => {
                    let mlp = checkpoint::load(&dir.join("model.json"))?;
                    let loss: Objective = std::fs::read_to_string(dir.join("loss.txt"))?
                        .trim()
                        .parse()
                        .map_err(|e| BenchError::Config(format!("loss.txt: {e}")))?;
                    let problem = single_problem(&cfg);
                    let data = trial_data(cfg.seed, 0, &problem)?;
                    let trained = TrainedModel::new(mlp, loss);
                    evaluate(
                        &trained,
                        &data.spec,
                        &EvalInputs {
                            diag_sets: &[&data.train_p, &data.train_q],
                            test_p: &data.test_p,
                            n_train: problem.n_train,
                            seed: cfg.seed,
                            p_orders: &cfg.p_orders,
                            lipschitz_pairs: cfg.lipschitz_pairs,
                        },
                        &mut stream_rng(cfg.seed, &[tags::LIPSCHITZ]),
                    )?
                }
            };
            println!("{}", report.to_json()?);
        }
        Command::SweepKl => {
            let cfg = resolve(c, ExperimentKind::KlSweep)?;
            finish_sweep(run_kl_sweep(&cfg)?, &cfg)?;
        }
        Command::SweepDim => {
            let cfg = resolve(c, ExperimentKind::DimSweep)?;
            finish_sweep(run_dim_sweep(&cfg)?, &cfg)?;
        }
        Command::VerifyBounds => {
            let cfg = resolve(c, ExperimentKind::NnBounds)?;
            let record = run_nn_bounds(&cfg)?;
            let nn = record.nn.as_ref().expect("nn_bounds fills the nn record");
            println!("side   d     N  order  estimate      bound         verdict");
            for cell in &nn.upper {
                let e = &cell.estimate;
                println!(
                    "upper {:>2} {:>5} {:>6} {:<13.6} {:<13.6} {}{}",
                    e.d,
                    e.n,
                    e.order,
                    e.estimate,
                    e.bound,
                    e.verdict,
                    if cell.within_hypothesis { "" } else { " (order > d)" }
                );
            }
            for e in &nn.lower.trend {
                println!(
                    "lower {:>2} {:>5} {:>6} {:<13.6} {:<13.6} {}",
                    e.d, e.n, e.order, e.estimate, e.bound, e.verdict
                );
            }
            let pass = nn.all_pass();
            finish_sweep(record, &cfg)?;
            if !pass {
                return Ok(ExitCode::from(4));
            }
        }
        Command::Plot { summary, svg } => {
            let svg = svg.unwrap_or_else(|| summary.with_extension("svg"));
            plot_file(&summary, &svg)?;
            println!("{}", svg.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
