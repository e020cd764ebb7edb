//! Fully connected rectifier networks with a scalar output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::tensor::{gemm, Tensor};
use super::AutodiffError;

/// One affine layer: `x · weight + bias`, with `weight` stored `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Multilayer perceptron `ℝ^d → ℝ` with rectifiers on hidden layers and an
/// identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

/// Result of recording a forward pass on a tape.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `n × 1` network outputs.
    pub output: Var,
    /// Parameter leaves in [`MlpModel::params`] order.
    pub params: Vec<Var>,
}

impl MlpModel {
    /// Builds a network with scaled-uniform weights, bound `sqrt(6/(fan_in+fan_out))`,
    /// and zero biases. `widths` runs from the input dimension to the final `1`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self, AutodiffError> {
        validate_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Dense {
                    weight: Tensor::from_parts_unchecked(vec![fan_in, fan_out], data),
                    bias: Tensor::zeros(vec![1, fan_out]),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// All weights and biases zero, so the output is identically zero.
    pub fn zeros(widths: &[usize]) -> Result<Self, AutodiffError> {
        validate_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| Dense {
                weight: Tensor::zeros(vec![w[0], w[1]]),
                bias: Tensor::zeros(vec![1, w[1]]),
            })
            .collect();
        Ok(Self { layers })
    }

    /// Input width, `hidden` layers of `width` units, scalar output.
    pub fn widths_for(input: usize, hidden: usize, width: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(width, hidden));
        w.push(1);
        w
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, AutodiffError> {
        if layers.is_empty() {
            return Err(AutodiffError::InvalidModel("no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            let (fi, fo) = l.weight.dims2()?;
            if l.bias.shape() != [1, fo] {
                return Err(AutodiffError::InvalidModel(format!(
                    "layer {i}: bias shape {:?} does not match {fi}×{fo} weight",
                    l.bias.shape()
                )));
            }
            if i > 0 && layers[i - 1].weight.cols() != fi {
                return Err(AutodiffError::InvalidModel(format!(
                    "layer {i}: input width {fi} does not follow previous output {}",
                    layers[i - 1].weight.cols()
                )));
            }
        }
        if layers.last().map(|l| l.weight.cols()) != Some(1) {
            return Err(AutodiffError::InvalidModel("output width must be 1".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.weight.cols()));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    /// Weights and biases interleaved, layer by layer.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<(), AutodiffError> {
        let (_, cols) = batch.dims2()?;
        if cols != self.input_dim() {
            return Err(AutodiffError::ShapeMismatch {
                op: "forward",
                detail: format!("batch has {cols} columns, model expects {}", self.input_dim()),
            });
        }
        if !batch.is_finite() {
            return Err(AutodiffError::NonFinite { op: "forward" });
        }
        Ok(())
    }

    /// Records `T(x)` for every row of `batch` on `tape`.
    pub fn forward(&self, tape: &mut Tape, batch: &Tensor) -> Result<Forward, AutodiffError> {
        self.check_batch(batch)?;
        let mut h = tape.leaf(batch.clone());
        let mut params = Vec::with_capacity(2 * self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let w = tape.leaf(layer.weight.clone());
            let b = tape.leaf(layer.bias.clone());
            params.push(w);
            params.push(b);
            let z = tape.matmul(h, w)?;
            h = tape.add_row(z, b)?;
            if i < last {
                h = tape.relu(h)?;
            }
        }
        Ok(Forward { output: h, params })
    }

    /// Tape-free evaluation; returns one value per row.
    pub fn predict(&self, batch: &Tensor) -> Result<Vec<f64>, AutodiffError> {
        self.check_batch(batch)?;
        let last = self.layers.len() - 1;
        let mut h = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = gemm(&h, false, &layer.weight, false)?;
            let m = z.cols();
            let bias = layer.bias.data();
            for row in z.data_mut().chunks_mut(m) {
                for (x, b) in row.iter_mut().zip(bias) {
                    *x += b;
                    if i < last && *x < 0.0 {
                        *x = 0.0;
                    }
                }
            }
            h = z;
        }
        if !h.is_finite() {
            return Err(AutodiffError::NonFinite { op: "predict" });
        }
        Ok(h.into_data())
    }
}

fn validate_widths(widths: &[usize]) -> Result<(), AutodiffError> {
    if widths.len() < 2 {
        return Err(AutodiffError::InvalidModel("need at least input and output widths".into()));
    }
    if widths.contains(&0) {
        return Err(AutodiffError::InvalidModel(format!("zero width in {widths:?}")));
    }
    if widths.last() != Some(&1) {
        return Err(AutodiffError::InvalidModel("output width must be 1".into()));
    }
    Ok(())
}
