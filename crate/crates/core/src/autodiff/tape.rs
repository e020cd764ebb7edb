//! Gradient tape for reverse-mode differentiation over [`Tensor`] values.
//!
//! Every operation appends a node holding its output and whatever it needs
//! to push gradients back to its inputs. Nodes are only ever appended, so
//! inputs always precede their consumers and a single reverse sweep visits
//! the graph in topological order. [`Tape::backward`] consumes the tape.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::tensor::{check_finite, gemm, Tensor};
use super::AutodiffError;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(0);

/// Handle to a value recorded on a particular [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

/// Scalar function paired with its derivative, applied elementwise.
#[derive(Clone)]
pub struct ElementwiseFn {
    pub name: &'static str,
    pub value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ElementwiseFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ElementwiseFn").field("name", &self.name).finish()
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    AddRow(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Mean(usize),
    Sum(usize),
    SliceRows(usize, usize),
    /// Elementwise op; the local derivative is cached at forward time.
    Unary { input: usize, local: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records a computation graph for one forward pass.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> Result<&Tensor, AutodiffError> {
        let i = self.index(v)?;
        Ok(&self.nodes[i].value)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn index(&self, v: Var) -> Result<usize, AutodiffError> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(AutodiffError::ForeignVar);
        }
        Ok(v.index)
    }

    fn checked(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var, AutodiffError> {
        check_finite(op_name, value.data())?;
        Ok(self.push(value, op))
    }

    fn same_shape(&self, op: &'static str, a: usize, b: usize) -> Result<(), AutodiffError> {
        let (sa, sb) = (self.nodes[a].value.shape(), self.nodes[b].value.shape());
        if sa != sb {
            return Err(AutodiffError::ShapeMismatch {
                op,
                detail: format!("{sa:?} vs {sb:?}"),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let out = gemm(&self.nodes[ia].value, false, &self.nodes[ib].value, false)?;
        self.checked("matmul", out, Op::MatMul(ia, ib))
    }

    /// Adds a `1 × m` row vector to every row of an `n × m` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, AutodiffError> {
        let (ia, ir) = (self.index(a)?, self.index(row)?);
        let (n, m) = self.nodes[ia].value.dims2()?;
        let (rr, rc) = self.nodes[ir].value.dims2()?;
        if rr != 1 || rc != m {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_row",
                detail: format!("cannot broadcast {rr}×{rc} onto {n}×{m}"),
            });
        }
        let bias = self.nodes[ir].value.data();
        let mut data = self.nodes[ia].value.data().to_vec();
        for chunk in data.chunks_mut(m) {
            for (x, b) in chunk.iter_mut().zip(bias) {
                *x += b;
            }
        }
        let out = Tensor::from_parts_unchecked(vec![n, m], data);
        self.checked("add_row", out, Op::AddRow(ia, ir))
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: impl Fn(usize, usize) -> Op,
    ) -> Result<Var, AutodiffError> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        self.same_shape(name, ia, ib)?;
        let va = &self.nodes[ia].value;
        let vb = &self.nodes[ib].value;
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        let out = Tensor::from_parts_unchecked(va.shape().to_vec(), data);
        self.checked(name, out, op(ia, ib))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let ia = self.index(a)?;
        let v = &self.nodes[ia].value;
        let data = v.data().iter().map(|x| x * c).collect();
        let out = Tensor::from_parts_unchecked(v.shape().to_vec(), data);
        self.checked("scale", out, Op::Scale(ia, c))
    }

    /// Mean over all entries, as a `1 × 1` tensor.
    pub fn mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ia = self.index(a)?;
        let v = &self.nodes[ia].value;
        if v.is_empty() {
            return Err(AutodiffError::ShapeMismatch {
                op: "mean",
                detail: "mean of an empty tensor".into(),
            });
        }
        let m = v.data().iter().sum::<f64>() / v.len() as f64;
        self.checked("mean", Tensor::from_parts_unchecked(vec![1, 1], vec![m]), Op::Mean(ia))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ia = self.index(a)?;
        let s = self.nodes[ia].value.data().iter().sum::<f64>();
        self.checked("sum", Tensor::from_parts_unchecked(vec![1, 1], vec![s]), Op::Sum(ia))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        let ia = self.index(a)?;
        let v = &self.nodes[ia].value;
        if start > end || end > v.rows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "slice_rows",
                detail: format!("rows {start}..{end} out of {}", v.rows()),
            });
        }
        let out = v.slice_rows(start, end);
        Ok(self.push(out, Op::SliceRows(ia, start)))
    }

    fn unary(
        &mut self,
        name: &'static str,
        a: Var,
        f: impl Fn(f64) -> (f64, f64),
    ) -> Result<Var, AutodiffError> {
        let ia = self.index(a)?;
        let v = &self.nodes[ia].value;
        let mut out = Vec::with_capacity(v.len());
        let mut local = Vec::with_capacity(v.len());
        for &x in v.data() {
            let (y, dy) = f(x);
            out.push(y);
            local.push(dy);
        }
        check_finite(name, &local)?;
        let out = Tensor::from_parts_unchecked(v.shape().to_vec(), out);
        self.checked(name, out, Op::Unary { input: ia, local })
    }

    /// Rectifier; the subgradient at exactly zero is zero.
    pub fn relu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.unary("relu", a, |x| if x > 0.0 { (x, 1.0) } else { (0.0, 0.0) })
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.unary("exp", a, |x| {
            let e = x.exp();
            (e, e)
        })
    }

    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.unary("log", a, |x| (x.ln(), 1.0 / x))
    }

    /// Elementwise `x^k`.
    pub fn powf(&mut self, a: Var, k: f64) -> Result<Var, AutodiffError> {
        self.unary("powf", a, |x| (x.powf(k), k * x.powf(k - 1.0)))
    }

    /// Applies a user-supplied scalar function with a known derivative.
    pub fn map(&mut self, a: Var, f: &ElementwiseFn) -> Result<Var, AutodiffError> {
        self.unary(f.name, a, |x| ((f.value)(x), (f.derivative)(x)))
    }

    /// Runs the reverse sweep from a scalar root and consumes the tape.
    pub fn backward(self, root: Var) -> Result<Gradients, AutodiffError> {
        let ir = self.index(root)?;
        if self.nodes[ir].value.len() != 1 {
            return Err(AutodiffError::NonScalarRoot {
                shape: self.nodes[ir].value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[ir] = Some(vec![1.0]);

        for i in (0..=ir).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let gt = Tensor::from_parts_unchecked(node.value.shape().to_vec(), g.clone());
                    let ga = gemm(&gt, false, &self.nodes[*b].value, true)?;
                    let gb = gemm(&self.nodes[*a].value, true, &gt, false)?;
                    accumulate(&mut grads[*a], ga.data());
                    accumulate(&mut grads[*b], gb.data());
                }
                Op::AddRow(a, r) => {
                    let m = node.value.cols();
                    let mut gr = vec![0.0; m];
                    for chunk in g.chunks(m) {
                        for (s, x) in gr.iter_mut().zip(chunk) {
                            *s += x;
                        }
                    }
                    accumulate(&mut grads[*r], &gr);
                    accumulate(&mut grads[*a], &g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[*a], &g);
                    accumulate(&mut grads[*b], &g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[*a], &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    accumulate(&mut grads[*b], &neg);
                }
                Op::Mul(a, b) => {
                    let va = self.nodes[*a].value.data();
                    let vb = self.nodes[*b].value.data();
                    let ga: Vec<f64> = g.iter().zip(vb).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(va).map(|(x, y)| x * y).collect();
                    accumulate(&mut grads[*a], &ga);
                    accumulate(&mut grads[*b], &gb);
                }
                Op::Scale(a, c) => {
                    let ga: Vec<f64> = g.iter().map(|x| x * c).collect();
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Mean(a) => {
                    let n = self.nodes[*a].value.len();
                    let ga = vec![g[0] / n as f64; n];
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Sum(a) => {
                    let n = self.nodes[*a].value.len();
                    accumulate(&mut grads[*a], &vec![g[0]; n]);
                }
                Op::SliceRows(a, start) => {
                    let src = &self.nodes[*a].value;
                    let c = src.cols();
                    let slot = grads[*a].get_or_insert_with(|| vec![0.0; src.len()]);
                    for (s, x) in slot[start * c..start * c + g.len()].iter_mut().zip(&g) {
                        *s += x;
                    }
                }
                Op::Unary { input, local } => {
                    let ga: Vec<f64> = g.iter().zip(local).map(|(x, d)| x * d).collect();
                    accumulate(&mut grads[*input], &ga);
                }
            }
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients {
            tape: self.id,
            grads,
            shapes,
        })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => {
            for (a, x) in acc.iter_mut().zip(g) {
                *a += x;
            }
        }
        None => *slot = Some(g.to_vec()),
    }
}

/// Gradients of a scalar root with respect to every leaf of its tape.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to a leaf; zeros if the root does not depend on it.
    pub fn get(&self, v: Var) -> Result<Tensor, AutodiffError> {
        if v.tape != self.tape || v.index >= self.grads.len() {
            return Err(AutodiffError::ForeignVar);
        }
        let shape = self.shapes[v.index].clone();
        let data = match &self.grads[v.index] {
            Some(g) => g.clone(),
            None => vec![0.0; shape.iter().product()],
        };
        check_finite("gradient", &data)?;
        Ok(Tensor::from_parts_unchecked(shape, data))
    }

    pub fn collect(&self, vars: &[Var]) -> Result<Vec<Tensor>, AutodiffError> {
        vars.iter().map(|v| self.get(*v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn linear_gradient_equals_input() {
        let mut tape = Tape::new();
        let w = tape.leaf(t(1, 3, &[0.5, -1.0, 2.0]));
        let x = tape.leaf(t(1, 3, &[3.0, 4.0, -5.0]));
        let wx = tape.mul(w, x).unwrap();
        let loss = tape.sum(wx).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[3.0, 4.0, -5.0]);
    }

    #[test]
    fn constant_root_gives_zero_gradients() {
        let mut tape = Tape::new();
        let w = tape.leaf(t(2, 2, &[1., 2., 3., 4.]));
        let c = tape.leaf(Tensor::scalar(7.0).unwrap());
        let g = tape.backward(c).unwrap();
        assert!(g.get(w).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn relu_zero_convention() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(1, 3, &[-1.0, 0.0, 2.0]));
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).unwrap().data(), &[0.0, 0.0, 2.0]);
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(1, 2, &[1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(AutodiffError::NonScalarRoot { .. })));
    }

    #[test]
    fn foreign_var_rejected() {
        let mut a = Tape::new();
        let mut b = Tape::new();
        let xa = a.leaf(Tensor::scalar(1.0).unwrap());
        let _ = b.leaf(Tensor::scalar(1.0).unwrap());
        assert!(matches!(b.exp(xa), Err(AutodiffError::ForeignVar)));
        assert!(matches!(b.backward(xa), Err(AutodiffError::ForeignVar)));
    }

    #[test]
    fn overflow_is_reported() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1000.0).unwrap());
        assert!(matches!(tape.exp(x), Err(AutodiffError::NonFinite { op: "exp" })));
        let z = tape.leaf(Tensor::scalar(0.0).unwrap());
        assert!(tape.log(z).is_err());
    }

    #[test]
    fn slice_rows_scatters_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(3, 1, &[1.0, 2.0, 3.0]));
        let top = tape.slice_rows(x, 1, 3).unwrap();
        let s = tape.sum(top).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn shared_input_accumulates() {
        // d/dx (x*x) = 2x
        let mut tape = Tape::new();
        let x = tape.leaf(t(1, 2, &[1.5, -2.0]));
        let y = tape.mul(x, x).unwrap();
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[3.0, -4.0]);
    }
}
