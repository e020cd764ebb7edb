//! Central finite-difference checks shared by the gradient tests and the acceptance suite.
#![allow(dead_code)]

use dre_core::autodiff::{AutodiffError, MlpModel, Tape, Tensor, Var};
use dre_core::divergence::Objective;
use rand::Rng;

/// Components smaller than this are compared absolutely.
pub const FD_FLOOR: f64 = 1e-3;
pub const FD_STEP: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_FLOOR)
}

pub fn random_tensor<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Entries in `±[0.05, 1]`, away from the rectifier kink.
pub fn signed_tensor<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let m = rng.random_range(0.05..1.0);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

type Build<'a> = dyn Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError> + 'a;

fn scalar_of(build: &Build, inputs: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = build(&mut tape, &vars).unwrap();
    tape.value(root).unwrap().data()[0]
}

/// Largest relative error between reverse-mode and central-difference
/// gradients of a scalar-valued graph with respect to every input entry.
pub fn check_graph(build: &Build, inputs: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = build(&mut tape, &vars).unwrap();
    let grads = tape.backward(root).unwrap().collect(&vars).unwrap();
    let mut worst = 0.0f64;
    for (i, g) in grads.iter().enumerate() {
        for j in 0..inputs[i].len() {
            let x = inputs[i].data()[j];
            let h = FD_STEP * x.abs().max(1.0);
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] = x + h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] = x - h;
            let fd = (scalar_of(build, &plus) - scalar_of(build, &minus)) / (2.0 * h);
            worst = worst.max(rel_err(g.data()[j], fd));
        }
    }
    worst
}

/// Reduces a tensor-valued op to a scalar through a fixed random projection.
pub fn project(tape: &mut Tape, v: Var, weights: &Tensor) -> Result<Var, AutodiffError> {
    let w = tape.leaf(weights.clone());
    let m = tape.mul(v, w)?;
    tape.sum(m)
}

fn loss_value(model: &MlpModel, objective: &Objective, p: &Tensor, q: &Tensor) -> f64 {
    objective.evaluate(&model.predict(p).unwrap(), &model.predict(q).unwrap()).unwrap()
}

/// Checks the parameter gradient of a training objective on `model`. The
/// finite differences go through the tape-free prediction path.
pub fn check_objective(model: &MlpModel, objective: &Objective, p: &Tensor, q: &Tensor) -> f64 {
    let mut tape = Tape::new();
    let batch = Tensor::vstack(p, q).unwrap();
    let fwd = model.forward(&mut tape, &batch).unwrap();
    let tp = tape.slice_rows(fwd.output, 0, p.rows()).unwrap();
    let tq = tape.slice_rows(fwd.output, p.rows(), batch.rows()).unwrap();
    let root = objective.record(&mut tape, tp, tq).unwrap();
    let grads = tape.backward(root).unwrap().collect(&fwd.params).unwrap();
    let mut worst = 0.0f64;
    for (i, g) in grads.iter().enumerate() {
        for j in 0..g.len() {
            let x = model.params()[i].data()[j];
            let h = FD_STEP * x.abs().max(1.0);
            let mut plus = model.clone();
            plus.params_mut()[i].data_mut()[j] = x + h;
            let mut minus = model.clone();
            minus.params_mut()[i].data_mut()[j] = x - h;
            let fd = (loss_value(&plus, objective, p, q) - loss_value(&minus, objective, p, q)) / (2.0 * h);
            worst = worst.max(rel_err(g.data()[j], fd));
        }
    }
    worst
}
