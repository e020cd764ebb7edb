//! A miniature KL sweep written to a temporary directory: record JSON, trial
//! and summary CSVs, and an SVG figure.
use dre_core::bench::{run_kl_sweep, write_run, ExperimentConfig, Scale};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::from_toml_str(
        r#"
        trials = 2
        seed = 5
        [network]
        hidden_layers = 2
        width = 32
        [training]
        learning_rate = 1e-3
        [kl_sweep]
        dim = 2
        kl_values = [0.5, 1.0, 2.0]
        n_train = 1000
        n_val = 500
        n_test = 1000
        "#,
        Some(Scale::Desk),
    )?;
    cfg.out_dir = std::env::temp_dir().join("dre-kl-sweep");
    let record = run_kl_sweep(&cfg)?;
    for c in &record.cells {
        println!(
            "{:<10} KL={:<4} median L1 {:.4}  L2 {:.4}",
            c.key.loss,
            c.key.kl,
            c.lp_median(1.0).unwrap_or(f64::NAN),
            c.lp_median(2.0).unwrap_or(f64::NAN)
        );
    }
    for path in write_run(&record, &cfg.p_orders, &cfg.out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}
