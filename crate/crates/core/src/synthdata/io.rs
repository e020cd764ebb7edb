//! Dataset dumps: a CSV of points with header `x0,...,x{d-1}` and a JSON
//! sidecar holding the [`MixtureSpec`], so ratios can be recomputed.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::mixture::{MixtureSpec, SampleSet};
use super::rng::{Source, Split};
use super::DataError;
use crate::autodiff::Tensor;

pub fn write_points_csv<W: Write>(points: &Tensor, out: W) -> Result<(), DataError> {
    let (rows, cols) = points.dims2().map_err(|e| DataError::Format(e.to_string()))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..cols).map(|j| format!("x{j}")))?;
    for i in 0..rows {
        w.write_record(points.row(i).iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv<R: Read>(input: R) -> Result<Tensor, DataError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    for (j, h) in header.iter().enumerate() {
        if h != format!("x{j}") {
            return Err(DataError::Format(format!("column {j} is named {h:?}")));
        }
    }
    let cols = header.len();
    if cols == 0 {
        return Err(DataError::Format("no columns".into()));
    }
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| DataError::Format(format!("not a number: {field:?}")))?;
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(DataError::Empty);
    }
    Tensor::matrix(data.len() / cols, cols, data).map_err(|e| DataError::Format(e.to_string()))
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("spec.json")
}

/// Writes `path` (CSV) and `path` with extension `spec.json`.
pub fn save_dataset(path: &Path, set: &SampleSet, spec: &MixtureSpec) -> Result<(), DataError> {
    if set.dim() != spec.dim {
        return Err(DataError::DimensionMismatch {
            expected: spec.dim,
            got: set.dim(),
        });
    }
    write_points_csv(&set.points, fs::File::create(path)?)?;
    fs::write(sidecar(path), serde_json::to_string_pretty(spec)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path, source: Source, split: Split) -> Result<(SampleSet, MixtureSpec), DataError> {
    let spec: MixtureSpec = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
    spec.validate()?;
    let points = read_points_csv(fs::File::open(path)?)?;
    if points.cols() != spec.dim {
        return Err(DataError::DimensionMismatch {
            expected: spec.dim,
            got: points.cols(),
        });
    }
    Ok((SampleSet::new(points, source, split)?, spec))
}
