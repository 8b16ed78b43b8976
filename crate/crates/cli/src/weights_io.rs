//! Weight blobs: raw little-endian f64 plus a JSON shape manifest.
//!
//! `model.json` names the blob (relative to itself) and lists every block in
//! file order with its shape and byte offset:
//!
//! ```json
//! {"data": "model.bin", "dtype": "f64le", "seed": 7,
//!  "blocks": [{"name": "encoder[0].W_ih", "shape": [2560, 80], "offset": 0}]}
//! ```
//!
//! Matrices are stored row-major.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rnnt_memcost::arch::ValidatedSpec;
use rnnt_memcost::cells::{CellError, CellWeights, ModelWeights};
use serde::{Deserialize, Serialize};

pub const DTYPE: &str = "f64le";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Byte offset into the blob.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub data: String,
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub blocks: Vec<BlockEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum WeightsError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed manifest: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("unsupported dtype `{0}` (expected {DTYPE})")]
    Dtype(String),
    #[error("block {0} missing from manifest")]
    Missing(String),
    #[error("block {0} is not part of this model")]
    Unexpected(String),
    #[error("block {name}: expected {}x{}, manifest says {}x{}", expected[0], expected[1], found[0], found[1])]
    Shape { name: String, expected: [usize; 2], found: [usize; 2] },
    #[error("block {name} runs past the end of the blob ({len} bytes)")]
    Truncated { name: String, len: u64 },
    #[error(transparent)]
    Cell(#[from] CellError),
}

fn cell_blocks<'a>(prefix: &str, w: &'a CellWeights, out: &mut Vec<(String, [usize; 2], &'a [f64])>) {
    out.push((format!("{prefix}.W_ih"), [w.w_ih.rows(), w.w_ih.cols()], w.w_ih.as_slice()));
    if let Some(m) = &w.w_hh {
        out.push((format!("{prefix}.W_hh"), [m.rows(), m.cols()], m.as_slice()));
    }
    if let Some(m) = &w.w_ch {
        out.push((format!("{prefix}.W_ch"), [m.rows(), m.cols()], m.as_slice()));
    }
    out.push((format!("{prefix}.bias"), [w.bias.len(), 1], &w.bias));
    for (tag, ln) in [("ln_gates", &w.ln_gates), ("ln_candidate", &w.ln_candidate), ("ln_cell", &w.ln_cell)] {
        if let Some(ln) = ln {
            out.push((format!("{prefix}.{tag}.gain"), [ln.len(), 1], &ln.gain));
            out.push((format!("{prefix}.{tag}.bias"), [ln.len(), 1], &ln.bias));
        }
    }
}

/// Every block of `w` in file order.
pub fn named_blocks(w: &ModelWeights) -> Vec<(String, [usize; 2], &[f64])> {
    let mut out = Vec::new();
    for (i, c) in w.encoder.iter().enumerate() {
        cell_blocks(&format!("encoder[{i}]"), c, &mut out);
    }
    let d = &w.decoder;
    out.push(("embedding".into(), [d.embedding.rows(), d.embedding.cols()], d.embedding.as_slice()));
    for (i, c) in d.prediction.iter().enumerate() {
        cell_blocks(&format!("prediction[{i}]"), c, &mut out);
    }
    out.push(("joint.W_joint".into(), [d.joint_hidden.rows(), d.joint_hidden.cols()], d.joint_hidden.as_slice()));
    out.push(("joint.W_out".into(), [d.joint_output.rows(), d.joint_output.cols()], d.joint_output.as_slice()));
    out.push(("joint.bias".into(), [d.joint_bias.len(), 1], &d.joint_bias));
    out
}

fn cell_blocks_mut<'a>(prefix: &str, w: &'a mut CellWeights, out: &mut Vec<(String, &'a mut [f64])>) {
    out.push((format!("{prefix}.W_ih"), w.w_ih.as_mut_slice()));
    if let Some(m) = &mut w.w_hh {
        out.push((format!("{prefix}.W_hh"), m.as_mut_slice()));
    }
    if let Some(m) = &mut w.w_ch {
        out.push((format!("{prefix}.W_ch"), m.as_mut_slice()));
    }
    out.push((format!("{prefix}.bias"), &mut w.bias));
    for (tag, ln) in [("ln_gates", &mut w.ln_gates), ("ln_candidate", &mut w.ln_candidate), ("ln_cell", &mut w.ln_cell)] {
        if let Some(ln) = ln {
            out.push((format!("{prefix}.{tag}.gain"), &mut ln.gain));
            out.push((format!("{prefix}.{tag}.bias"), &mut ln.bias));
        }
    }
}

fn named_blocks_mut(w: &mut ModelWeights) -> Vec<(String, &mut [f64])> {
    let mut out = Vec::new();
    for (i, c) in w.encoder.iter_mut().enumerate() {
        cell_blocks_mut(&format!("encoder[{i}]"), c, &mut out);
    }
    let d = &mut w.decoder;
    out.push(("embedding".into(), d.embedding.as_mut_slice()));
    for (i, c) in d.prediction.iter_mut().enumerate() {
        cell_blocks_mut(&format!("prediction[{i}]"), c, &mut out);
    }
    out.push(("joint.W_joint".into(), d.joint_hidden.as_mut_slice()));
    out.push(("joint.W_out".into(), d.joint_output.as_mut_slice()));
    out.push(("joint.bias".into(), &mut d.joint_bias));
    out
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> WeightsError + '_ {
    move |source| WeightsError::Io { path: path.into(), source }
}

/// Writes `<stem>.json` and `<stem>.bin` next to each other; returns the manifest path.
pub fn save(w: &ModelWeights, seed: Option<u64>, stem: impl AsRef<Path>) -> Result<PathBuf, WeightsError> {
    let stem = stem.as_ref();
    let manifest_path = stem.with_extension("json");
    let data_path = stem.with_extension("bin");
    let mut blob = Vec::new();
    let mut blocks = Vec::new();
    for (name, shape, data) in named_blocks(w) {
        blocks.push(BlockEntry { name, shape, offset: blob.len() as u64 });
        for x in data {
            blob.extend_from_slice(&x.to_le_bytes());
        }
    }
    let manifest = Manifest {
        data: data_path.file_name().expect("stem has a file name").to_string_lossy().into_owned(),
        dtype: DTYPE.into(),
        seed,
        blocks,
    };
    fs::write(&data_path, &blob).map_err(io(&data_path))?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text + "\n").map_err(io(&manifest_path))?;
    Ok(manifest_path)
}

/// Loads weights for `spec`; every block must be present with the model's shape.
pub fn load(spec: &ValidatedSpec, manifest_path: impl AsRef<Path>) -> Result<(ModelWeights, Manifest), WeightsError> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(io(manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|source| WeightsError::Manifest { path: manifest_path.into(), source })?;
    if manifest.dtype != DTYPE {
        return Err(WeightsError::Dtype(manifest.dtype));
    }
    let data_path = manifest_path.parent().unwrap_or(Path::new(".")).join(&manifest.data);
    let blob = fs::read(&data_path).map_err(io(&data_path))?;

    let mut entries: BTreeMap<&str, &BlockEntry> = manifest.blocks.iter().map(|b| (b.name.as_str(), b)).collect();
    let mut weights = ModelWeights::zeros(spec);
    let shapes: Vec<[usize; 2]> = named_blocks(&weights).into_iter().map(|(_, s, _)| s).collect();
    for ((name, dst), expected) in named_blocks_mut(&mut weights).into_iter().zip(shapes) {
        let entry = entries.remove(name.as_str()).ok_or_else(|| WeightsError::Missing(name.clone()))?;
        if entry.shape != expected {
            return Err(WeightsError::Shape { name, expected, found: entry.shape });
        }
        let start = entry.offset as usize;
        let end = start.checked_add(dst.len() * 8).filter(|&e| e <= blob.len());
        let Some(end) = end else {
            return Err(WeightsError::Truncated { name, len: blob.len() as u64 });
        };
        for (x, chunk) in dst.iter_mut().zip(blob[start..end].chunks_exact(8)) {
            *x = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
    }
    if let Some(name) = entries.keys().next() {
        return Err(WeightsError::Unexpected((*name).into()));
    }
    weights.check(spec)?;
    Ok((weights, manifest))
}
