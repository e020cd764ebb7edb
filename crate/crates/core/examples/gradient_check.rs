//! Record a small graph on a tape and compare reverse-mode gradients with
//! central differences.
use dre_core::autodiff::{AutodiffError, Tape, Tensor};

fn value(x: &Tensor, w: &Tensor) -> Result<f64, AutodiffError> {
    let mut t = Tape::new();
    let (x, w) = (t.leaf(x.clone()), t.leaf(w.clone()));
    let h = t.matmul(x, w)?;
    let e = t.exp(h)?;
    let m = t.mean(e)?;
    Ok(t.value(m)?.data()[0])
}

fn main() -> Result<(), AutodiffError> {
    let x = Tensor::matrix(3, 2, vec![0.1, -0.4, 0.7, 0.2, -0.3, 0.5])?;
    let w = Tensor::matrix(2, 1, vec![0.8, -1.2])?;

    let mut t = Tape::new();
    let (xv, wv) = (t.leaf(x.clone()), t.leaf(w.clone()));
    let h = t.matmul(xv, wv)?;
    let e = t.exp(h)?;
    let m = t.mean(e)?;
    let grad = t.backward(m)?.get(wv)?;

    let eps = 1e-6;
    for j in 0..w.len() {
        let (mut plus, mut minus) = (w.clone(), w.clone());
        plus.data_mut()[j] += eps;
        minus.data_mut()[j] -= eps;
        let fd = (value(&x, &plus)? - value(&x, &minus)?) / (2.0 * eps);
        println!("dL/dw[{j}]  tape {:+.10}  finite difference {fd:+.10}", grad.data()[j]);
    }
    Ok(())
}
