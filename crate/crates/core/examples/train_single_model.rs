//! Fit a ratio network with the KL loss and early stopping, then save and
//! reload it.
use dre_core::autodiff::{checkpoint, MlpModel};
use dre_core::divergence::Objective;
use dre_core::synthdata::{data_rng, sample_p, sample_q, stream_rng, MixtureSpec, Source, Split};
use dre_core::trainer::{train, TrainConfig, TrainedModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 3;
    let spec = MixtureSpec::new(2, 1, 1.0, seed)?;
    let draw_p = |n, split| sample_p(&spec, n, &mut data_rng(seed, 0, split, Source::P));
    let draw_q = |n, split| sample_q(&spec, n, &mut data_rng(seed, 0, split, Source::Q));
    let (tp, tq) = (draw_p(4000, Split::Train)?, draw_q(4000, Split::Train)?);
    let (vp, vq) = (draw_p(1000, Split::Val)?, draw_q(1000, Split::Val)?);

    let model = MlpModel::new(&MlpModel::widths_for(2, 2, 64), &mut stream_rng(seed, &[1]))?;
    let cfg = TrainConfig {
        objective: Objective::Kl,
        learning_rate: 1e-3,
        seed,
        ..TrainConfig::default()
    };
    let (fitted, report) = train(model, &tp, &tq, &vp, &vq, &cfg)?;
    for e in &report.history {
        println!("epoch {:>3}  train {:+.5}  val {:+.5}", e.epoch, e.train_loss, e.val_loss);
    }
    println!("stopped: {} after {} epochs, best epoch {}", report.stop_reason, report.epochs_run, report.best_epoch);

    for x in [[0.0, 0.0], [1.0, 0.5], [-1.0, 2.0]] {
        println!("x = {x:?}  estimate {:.4}  truth {:.4}", fitted.predict_ratio_at(&x)?, spec.true_ratio(&x)?);
    }

    let path = std::env::temp_dir().join("dre-example-model.json");
    checkpoint::save(&fitted.model, &path)?;
    let reloaded = TrainedModel::new(checkpoint::load(&path)?, fitted.objective);
    assert_eq!(reloaded.predict_ratio(&vp.points)?, fitted.predict_ratio(&vp.points)?);
    println!("checkpoint round trip ok: {}", path.display());
    Ok(())
}
