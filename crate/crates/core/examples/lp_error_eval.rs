//! One generate/train/evaluate pass and the resulting error report:
//! L_p errors, empirical Lipschitz and moment proxies, and the bound terms.
use dre_core::bench::{single_run, ExperimentConfig, Scale};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::defaults(Scale::Desk);
    cfg.network.width = 64;
    cfg.network.hidden_layers = 2;
    cfg.training.learning_rate = 1e-3;
    cfg.single_run.dim = 3;
    cfg.single_run.n_train = 3000;
    cfg.single_run.n_val = 1000;
    cfg.single_run.n_test = 3000;
    let (eval, train) = single_run(&cfg)?;
    println!("trained {} epochs ({})", train.epochs_run, train.stop_reason);
    for b in &eval.bounds {
        println!(
            "p={}  Lp {:.4}  upper {:.4}  lower(moment) {:.4}  lower(kl) {:.4}",
            b.p,
            eval.lp(b.p).unwrap_or(f64::NAN),
            b.upper,
            b.lower_moment,
            b.lower_kl
        );
    }
    println!("{}", eval.to_json()?);
    Ok(())
}
