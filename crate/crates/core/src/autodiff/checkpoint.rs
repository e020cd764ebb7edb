//! JSON checkpoints for [`MlpModel`].
//!
//! ```json
//! { "format": "dre-mlp/1", "widths": [d, h, ..., 1],
//!   "layers": [ { "weight": [...], "bias": [...] }, ... ] }
//! ```
//! Weights are stored row-major as `in × out`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{Dense, MlpModel};
use super::tensor::Tensor;
use super::AutodiffError;

pub const CHECKPOINT_FORMAT: &str = "dre-mlp/1";

#[derive(Debug, Serialize, Deserialize)]
struct LayerRecord {
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointRecord {
    format: String,
    widths: Vec<usize>,
    layers: Vec<LayerRecord>,
}

pub fn to_json(model: &MlpModel) -> String {
    let record = CheckpointRecord {
        format: CHECKPOINT_FORMAT.to_string(),
        widths: model.widths(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerRecord {
                weight: l.weight.data().to_vec(),
                bias: l.bias.data().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&record).expect("checkpoint serialization is infallible")
}

pub fn from_json(text: &str) -> Result<MlpModel, AutodiffError> {
    let record: CheckpointRecord =
        serde_json::from_str(text).map_err(|e| AutodiffError::Checkpoint(e.to_string()))?;
    if record.format != CHECKPOINT_FORMAT {
        return Err(AutodiffError::Checkpoint(format!(
            "unsupported format tag {:?}, expected {CHECKPOINT_FORMAT:?}",
            record.format
        )));
    }
    if record.widths.len() != record.layers.len() + 1 {
        return Err(AutodiffError::Checkpoint(format!(
            "{} widths for {} layers",
            record.widths.len(),
            record.layers.len()
        )));
    }
    let layers = record
        .widths
        .windows(2)
        .zip(record.layers)
        .map(|(w, l)| {
            Ok(Dense {
                weight: Tensor::matrix(w[0], w[1], l.weight)?,
                bias: Tensor::matrix(1, w[1], l.bias)?,
            })
        })
        .collect::<Result<Vec<_>, AutodiffError>>()?;
    MlpModel::from_layers(layers)
}

pub fn save(model: &MlpModel, path: &Path) -> Result<(), AutodiffError> {
    std::fs::write(path, to_json(model)).map_err(|e| AutodiffError::Checkpoint(e.to_string()))
}

pub fn load(path: &Path) -> Result<MlpModel, AutodiffError> {
    let text = std::fs::read_to_string(path).map_err(|e| AutodiffError::Checkpoint(e.to_string()))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let m = MlpModel::new(&[3, 5, 2, 1], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let back = from_json(&to_json(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_wrong_tag_and_shapes() {
        let m = MlpModel::zeros(&[2, 1]).unwrap();
        let text = to_json(&m).replace(CHECKPOINT_FORMAT, "dre-mlp/0");
        assert!(from_json(&text).is_err());
        let bad = r#"{"format":"dre-mlp/1","widths":[2,1],"layers":[{"weight":[1.0],"bias":[0.0]}]}"#;
        assert!(from_json(bad).is_err());
    }
}
