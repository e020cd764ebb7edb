mod common;

use proptest::prelude::*;

use dre_core::autodiff::{MlpModel, Tape, Tensor};
use dre_core::divergence::Objective;
use dre_core::synthdata::{sample_p, sample_q, stream_rng, MixtureSpec};
use dre_core::trainer::{train, TrainConfig};

use common::{check_graph, project, rel_err, FD_STEP};

const TOL: f64 = 1e-5;

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

fn positive(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(0.2f64..2.0, rows * cols).prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

/// Keeps every entry at least 0.01 away from the rectifier kink.
fn off_kink(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec((0.01f64..2.0, any::<bool>()), rows * cols).prop_map(move |d| {
        let data = d.into_iter().map(|(m, s)| if s { m } else { -m }).collect();
        Tensor::matrix(rows, cols, data).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matmul_gradient(a in tensor(3, 4), b in tensor(4, 2), w in tensor(3, 2)) {
        let e = check_graph(&|t, v| { let m = t.matmul(v[0], v[1])?; project(t, m, &w) }, &[a, b]);
        prop_assert!(e <= TOL, "{e}");
    }

    #[test]
    fn add_sub_mul_gradients(a in tensor(3, 3), b in tensor(3, 3), w in tensor(3, 3)) {
        let e = check_graph(
            &|t, v| {
                let s = t.add(v[0], v[1])?;
                let d = t.sub(v[0], v[1])?;
                let m = t.mul(s, d)?;
                project(t, m, &w)
            },
            &[a, b],
        );
        prop_assert!(e <= TOL, "{e}");
    }

    #[test]
    fn add_row_and_scale_gradients(a in tensor(4, 3), r in tensor(1, 3), w in tensor(4, 3), c in -3.0f64..3.0) {
        let e = check_graph(&|t, v| { let s = t.add_row(v[0], v[1])?; let s = t.scale(s, c)?; project(t, s, &w) }, &[a, r]);
        prop_assert!(e <= TOL, "{e}");
    }

    #[test]
    fn relu_gradient(a in off_kink(4, 3), w in tensor(4, 3)) {
        let e = check_graph(&|t, v| { let m = t.relu(v[0])?; project(t, m, &w) }, &[a]);
        prop_assert!(e <= TOL, "{e}");
    }

    #[test]
    fn exp_mean_gradient(a in tensor(5, 2)) {
        let e = check_graph(&|t, v| { let m = t.exp(v[0])?; t.mean(m) }, &[a]);
        prop_assert!(e <= TOL, "{e}");
    }

    #[test]
    fn log_and_power_gradients(a in positive(3, 3), w in tensor(3, 3), k in -2.0f64..3.0) {
        let e = check_graph(
            &|t, v| {
                let l = t.log(v[0])?;
                let p = t.powf(v[0], k)?;
                let s = t.add(l, p)?;
                project(t, s, &w)
            },
            &[a],
        );
        prop_assert!(e <= TOL, "{e}");
    }

    #[test]
    fn slice_and_sum_gradients(a in tensor(6, 2), w in tensor(3, 2)) {
        let e = check_graph(&|t, v| { let s = t.slice_rows(v[0], 2, 5)?; project(t, s, &w) }, &[a]);
        prop_assert!(e <= TOL, "{e}");
    }
}

fn dense_forward(model: &MlpModel, x: &[Vec<f64>]) -> Vec<f64> {
    let layers = model.layers();
    x.iter()
        .map(|row| {
            let mut h = row.clone();
            for (i, l) in layers.iter().enumerate() {
                let (fan_in, fan_out) = l.weight.dims2().unwrap();
                let mut next = vec![0.0; fan_out];
                for (j, out) in next.iter_mut().enumerate() {
                    let mut s = l.bias.data()[j];
                    for (k, hk) in h.iter().enumerate().take(fan_in) {
                        s += hk * l.weight.data()[k * fan_out + j];
                    }
                    *out = if i + 1 < layers.len() { s.max(0.0) } else { s };
                }
                h = next;
            }
            h[0]
        })
        .collect()
}

#[test]
fn forward_matches_plain_matrix_arithmetic() {
    let mut rng = stream_rng(9, &[1]);
    let mut model = MlpModel::new(&[3, 7, 1], &mut rng).unwrap();
    for p in model.params_mut() {
        for v in p.data_mut() {
            *v += 0.1;
        }
    }
    let x: Vec<Vec<f64>> = (0..5).map(|i| (0..3).map(|j| (i as f64 - 2.0) * 0.7 + j as f64 * 0.3).collect()).collect();
    let batch = Tensor::from_rows(&x).unwrap();
    let mut tape = Tape::new();
    let fwd = model.forward(&mut tape, &batch).unwrap();
    let taped = tape.value(fwd.output).unwrap().data().to_vec();
    let expect = dense_forward(&model, &x);
    for (a, b) in taped.iter().zip(&expect) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
    assert_eq!(model.predict(&batch).unwrap(), taped);
}

#[test]
fn mean_exp_of_network_matches_finite_differences() {
    let mut rng = stream_rng(9, &[2]);
    let model = MlpModel::new(&MlpModel::widths_for(2, 2, 6), &mut rng).unwrap();
    let batch = common::random_tensor(8, 2, -1.5, 1.5, &mut rng);
    let value = |m: &MlpModel| {
        let t = m.predict(&batch).unwrap();
        t.iter().map(|v| v.exp()).sum::<f64>() / t.len() as f64
    };
    let mut tape = Tape::new();
    let fwd = model.forward(&mut tape, &batch).unwrap();
    let e = tape.exp(fwd.output).unwrap();
    let root = tape.mean(e).unwrap();
    let grads = tape.backward(root).unwrap().collect(&fwd.params).unwrap();
    for (i, g) in grads.iter().enumerate() {
        for j in 0..g.len() {
            let x = model.params()[i].data()[j];
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.params_mut()[i].data_mut()[j] = x + FD_STEP;
            minus.params_mut()[i].data_mut()[j] = x - FD_STEP;
            let fd = (value(&plus) - value(&minus)) / (2.0 * FD_STEP);
            assert!(rel_err(g.data()[j], fd) <= TOL, "param {i}[{j}]: {} vs {fd}", g.data()[j]);
        }
    }
}

#[test]
fn same_seed_gives_identical_trajectories() {
    let spec = MixtureSpec::new(2, 1, 1.0, 4).unwrap();
    let mut rng = stream_rng(4, &[0]);
    let (tp, tq) = (sample_p(&spec, 600, &mut rng).unwrap(), sample_q(&spec, 600, &mut rng).unwrap());
    let (vp, vq) = (sample_p(&spec, 200, &mut rng).unwrap(), sample_q(&spec, 200, &mut rng).unwrap());
    let cfg = TrainConfig {
        objective: Objective::Kl,
        learning_rate: 1e-3,
        max_epochs: 5,
        seed: 4,
        ..TrainConfig::default()
    };
    let run = || {
        let m = MlpModel::new(&MlpModel::widths_for(2, 2, 16), &mut stream_rng(4, &[1])).unwrap();
        train(m, &tp, &tq, &vp, &vq, &cfg).unwrap()
    };
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(a.model, b.model);
    assert_eq!(ra.history, rb.history);
}
