use std::process::Command;

use dre_core::bench::{
    parse_summary_csv, render_summary_svg, run_dim_sweep, run_kl_sweep, single_run, summary_csv, trials_csv, write_run,
    BenchError, ExperimentConfig, Scale,
};
use dre_core::divergence::Objective;

const TINY: &str = r#"
trials = 2
seed = 12
lipschitz_pairs = 500
[network]
hidden_layers = 1
width = 16
[training]
learning_rate = 3e-3
max_epochs = 20
[kl_sweep]
dim = 2
kl_values = [0.5, 1.0]
n_train = 400
n_val = 200
n_test = 300
[dim_sweep]
kl = 1.0
dims = [2, 3]
sample_sizes = [200, 400]
pool_size = 400
n_val = 200
n_test = 300
[single_run]
dim = 3
kl = 0.0
n_train = 4000
n_val = 1000
n_test = 2000
[nn_bounds]
upper_dims = [1, 2]
upper_sizes = [1, 8]
upper_trials = 2000
lower_sizes = [64, 256]
lower_trials = 200
"#;

fn tiny() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(TINY, Some(Scale::Desk)).unwrap()
}

#[test]
fn kl_sweep_rows_and_determinism() {
    let cfg = tiny();
    let a = run_kl_sweep(&cfg).unwrap();
    let b = run_kl_sweep(&cfg).unwrap();
    assert_eq!(a.trials.len(), 2 * cfg.losses.len() * 2);
    assert_eq!(a.cells.len(), 2 * cfg.losses.len());
    assert_eq!(trials_csv(&a, &cfg.p_orders).unwrap(), trials_csv(&b, &cfg.p_orders).unwrap());
    assert_eq!(summary_csv(&a).unwrap(), summary_csv(&b).unwrap());
    assert_eq!(
        trials_csv(&a, &cfg.p_orders).unwrap().lines().count(),
        2 + a.trials.len(),
        "metadata + header + one row per trial"
    );
    for rep in a.reports() {
        for bnd in &rep.bounds {
            assert!(bnd.lower_kl <= bnd.lower_moment + 1e-12);
        }
    }
}

#[test]
fn dim_sweep_rows_and_pool_check() {
    let mut cfg = tiny();
    cfg.trials = 1;
    let rec = run_dim_sweep(&cfg).unwrap();
    assert_eq!(rec.trials.len(), 2 * 2 * cfg.losses.len());

    cfg.dim_sweep.sample_sizes = vec![200, 800];
    assert!(matches!(run_dim_sweep(&cfg), Err(BenchError::Config(_))));
}

#[test]
fn single_trial_single_kl_still_plots() {
    let mut cfg = tiny();
    cfg.trials = 1;
    cfg.kl_sweep.kl_values = vec![1.0];
    let rec = run_kl_sweep(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_run(&rec, &cfg.p_orders, dir.path()).unwrap();
    let svg_path = written.iter().find(|p| p.extension().is_some_and(|e| e == "svg")).unwrap();
    let svg = std::fs::read_to_string(svg_path).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let summary = std::fs::read_to_string(dir.path().join("kl_sweep_summary.csv")).unwrap();
    assert_eq!(render_summary_svg(&parse_summary_csv(&summary).unwrap()).unwrap(), svg);
}

#[test]
fn flat_problem_smoke_run() {
    let mut cfg = tiny();
    cfg.network.width = 32;
    cfg.training.max_epochs = 200;
    let (eval, _) = single_run(&cfg).unwrap();
    assert!(eval.lp(1.0).unwrap() <= 0.15, "{:?}", eval.lp(1.0));
    for b in &eval.bounds {
        assert!(b.lower_kl <= b.lower_moment + 1e-12);
    }
}

#[test]
fn config_errors_and_names() {
    let mut cfg = tiny();
    cfg.nn_bounds.upper_sizes.clear();
    assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
    assert_eq!("alpha:0.5".parse::<Objective>().unwrap(), "alpha".parse::<Objective>().unwrap());
    assert!(ExperimentConfig::from_toml_str("trials = 0", None).is_err());
    assert!(ExperimentConfig::from_toml_str("no_such_key = 1", None).is_err());
    assert_eq!(tiny().hash(), tiny().hash());
}

fn dre(args: &[&str], dir: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dre")).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn cli_exit_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.toml");
    std::fs::write(&cfg_path, TINY).unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    assert_eq!(dre(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(dre(&["sweep-kl", "--config", cfg, "--trials", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(dre(&["train", "--config", cfg, "--loss", "nonsense"], dir.path()).status.code(), Some(2));
    assert_eq!(dre(&["plot", "missing.csv"], dir.path()).status.code(), Some(2));
    let broken = dir.path().join("broken");
    std::fs::create_dir_all(&broken).unwrap();
    std::fs::write(broken.join("model.json"), "{\"format\": \"dre-mlp/1\", \"widths\": [3]}").unwrap();
    std::fs::write(broken.join("loss.txt"), "kl\n").unwrap();
    let bad_model = dre(&["eval", "--config", cfg, "--model", broken.to_str().unwrap()], dir.path());
    assert_eq!(bad_model.status.code(), Some(3), "{}", String::from_utf8_lossy(&bad_model.stderr));

    let ok = dre(&["verify-bounds", "--config", cfg, "--out", out_s], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    // κ far above d breaks the bound on the unit interval
    std::fs::write(&cfg_path, format!("{TINY}kappas = [8.0]\n")).unwrap();
    let fail = dre(&["verify-bounds", "--config", cfg, "--out", out_s], dir.path());
    assert_eq!(fail.status.code(), Some(4), "{}", String::from_utf8_lossy(&fail.stdout));
    std::fs::write(&cfg_path, TINY).unwrap();

    let model_dir = dir.path().join("model");
    let m = model_dir.to_str().unwrap();
    assert!(dre(&["generate", "--config", cfg, "--out", out_s], dir.path()).status.success());
    assert!(out.join("data/train_p.csv").exists() && out.join("data/train_p.spec.json").exists());
    assert!(dre(&["train", "--config", cfg, "--out", m, "--loss", "alpha"], dir.path()).status.success());
    let eval = dre(&["eval", "--config", cfg, "--model", m], dir.path());
    assert!(eval.status.success());
    let report: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(report["loss"], "alpha:0.5");

    assert!(dre(&["sweep-kl", "--config", cfg, "--out", out_s, "--trials", "1"], dir.path()).status.success());
    let svg = std::fs::read(out.join("kl_sweep.svg")).unwrap();
    let again = dir.path().join("again.svg");
    let plot = dre(
        &["plot", out.join("kl_sweep_summary.csv").to_str().unwrap(), "--svg", again.to_str().unwrap()],
        dir.path(),
    );
    assert!(plot.status.success());
    assert_eq!(std::fs::read(again).unwrap(), svg);
}
