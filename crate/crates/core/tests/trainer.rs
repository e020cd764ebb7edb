use proptest::prelude::*;

use dre_core::autodiff::{MlpModel, Tensor};
use dre_core::divergence::{empirical_loss_estimate, Generator, LossSpec, Objective};
use dre_core::synthdata::{data_rng, sample_p, sample_q, stream_rng, MixtureSpec, SampleSet, Source, Split};
use dre_core::trainer::{optimal_loss, train, StopReason, TrainConfig, TrainReport, TrainedModel};

struct Data {
    spec: MixtureSpec,
    tp: SampleSet,
    tq: SampleSet,
    vp: SampleSet,
    vq: SampleSet,
}

fn data(d: usize, kl: f64, n: usize, n_val: usize, seed: u64) -> Data {
    let spec = MixtureSpec::new(d, 1, kl, seed).unwrap();
    let p = |n, s| sample_p(&spec, n, &mut data_rng(seed, 0, s, Source::P)).unwrap();
    let q = |n, s| sample_q(&spec, n, &mut data_rng(seed, 0, s, Source::Q)).unwrap();
    Data {
        tp: p(n, Split::Train),
        tq: q(n, Split::Train),
        vp: p(n_val, Split::Val),
        vq: q(n_val, Split::Val),
        spec,
    }
}

fn fit(d: &Data, objective: Objective, width: usize, cfg: TrainConfig) -> (TrainedModel, TrainReport) {
    let model = MlpModel::new(&MlpModel::widths_for(d.spec.dim, 2, width), &mut stream_rng(cfg.seed, &[77])).unwrap();
    train(model, &d.tp, &d.tq, &d.vp, &d.vq, &TrainConfig { objective, ..cfg }).unwrap()
}

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        seed,
        ..TrainConfig::default()
    }
}

fn assert_contract(r: &TrainReport) {
    assert_eq!(r.history.len(), r.epochs_run);
    for e in &r.history {
        assert!(r.best_val_loss <= e.val_loss);
    }
    assert!(r.best_val_loss <= r.initial_val_loss);
    let at_best = if r.best_epoch == 0 {
        r.initial_val_loss
    } else {
        r.history[r.best_epoch - 1].val_loss
    };
    assert_eq!(r.best_val_loss, at_best);
}

#[test]
fn equal_distributions_give_a_flat_ratio_and_stop_early() {
    let d = data(3, 0.0, 10_000, 2000, 1);
    let (m, r) = fit(&d, Objective::Kl, 64, TrainConfig { max_epochs: 200, ..cfg(1) });
    let test = sample_p(&d.spec, 5000, &mut stream_rng(1, &[9])).unwrap();
    let phi = m.predict_ratio(&test.points).unwrap();
    let mae = phi.iter().map(|v| (v - 1.0).abs()).sum::<f64>() / phi.len() as f64;
    assert!(mae <= 0.15, "{mae}");
    assert_eq!(r.stop_reason, StopReason::Patience);
    assert!(r.epochs_run < 200 && r.best_epoch < r.epochs_run);
    assert_contract(&r);
}

#[test]
fn validation_loss_reaches_the_population_optimum() {
    let d = data(1, 0.5, 10_000, 10_000, 2);
    let (m, r) = fit(&d, Objective::Kl, 64, cfg(2));
    assert_contract(&r);

    let reference = sample_p(&d.spec, 100_000, &mut stream_rng(2, &[5])).unwrap();
    let opt = optimal_loss(&Objective::Kl, &d.spec.true_ratios(&reference.points).unwrap()).unwrap();
    let log_r = |s: &SampleSet| -> Vec<f64> { d.spec.true_ratios(&s.points).unwrap().iter().map(|v| v.ln()).collect() };
    let at_truth = empirical_loss_estimate(&LossSpec::log_scale(Generator::Kl), &log_r(&d.vp), &log_r(&d.vq)).unwrap();
    let se = opt.stderr.hypot(at_truth.stderr);
    assert!((r.best_val_loss - opt.mean).abs() <= 5.0 * se, "{} vs {} ± {se}", r.best_val_loss, opt.mean);

    for x in [-1.0, 0.0, 1.0] {
        let (est, truth) = (m.predict_ratio_at(&[x]).unwrap(), d.spec.true_ratio(&[x]).unwrap());
        assert!((est - truth).abs() <= 0.2, "x={x}: {est} vs {truth}");
    }
}

#[test]
fn train_loss_falls_over_the_first_epochs() {
    let improved = (0..10u64)
        .filter(|&seed| {
            let d = data(3, 1.0, 10_000, 2000, 100 + seed);
            let c = TrainConfig {
                max_epochs: 10,
                patience_epochs: 10,
                ..TrainConfig::default()
            };
            let (_, r) = fit(&d, Objective::Kl, 64, TrainConfig { seed, ..c });
            r.history[9].train_loss < r.history[0].train_loss
        })
        .count();
    assert!(improved >= 8, "{improved}/10");
}

#[test]
fn alpha_objective_learns_the_ratio_too() {
    let d = data(1, 0.5, 10_000, 2000, 3);
    let (m, r) = fit(&d, Objective::Alpha(0.5), 64, cfg(3));
    assert_contract(&r);
    for x in [-1.0, 0.0, 1.0] {
        let (est, truth) = (m.predict_ratio_at(&[x]).unwrap(), d.spec.true_ratio(&[x]).unwrap());
        assert!((est - truth).abs() <= 0.2, "x={x}: {est} vs {truth}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn early_stopping_contract(seed in 0u64..1000, kl in 0.0f64..2.0, patience in 1usize..4) {
        let d = data(2, kl, 300, 100, seed);
        let c = TrainConfig { patience_epochs: patience, max_epochs: 30, learning_rate: 3e-3, seed, ..TrainConfig::default() };
        let (m, r) = fit(&d, Objective::Kl, 16, c);
        assert_contract(&r);
        let tp = m.predict_raw(&d.vp.points).unwrap();
        let tq = m.predict_raw(&d.vq.points).unwrap();
        prop_assert_eq!(Objective::Kl.evaluate(&tp, &tq).unwrap(), r.best_val_loss);
    }

    #[test]
    fn ratio_is_exp_of_minus_energy(seed in any::<u64>(), xs in prop::collection::vec(-3.0f64..3.0, 8)) {
        let model = MlpModel::new(&[2, 8, 1], &mut stream_rng(seed, &[0])).unwrap();
        let pts = Tensor::matrix(4, 2, xs).unwrap();
        for obj in [Objective::Kl, Objective::Alpha(0.5)] {
            let m = TrainedModel::new(model.clone(), obj);
            let phi = m.predict_ratio(&pts).unwrap();
            let e = m.predict_energy(&pts).unwrap();
            for (a, b) in phi.iter().zip(&e) {
                prop_assert!(*a > 0.0);
                prop_assert!((a - (-b).exp()).abs() <= 1e-12 * a);
            }
        }
    }
}
