//! JSON model configs.
//!
//! ```json
//! {
//!   "_assumptions": ["feature_dim = 80", "..."],
//!   "feature_dim": 80,
//!   "encoder": [{"kind": "LSTM", "hidden": 640, "layernorm": "FULL"}],
//!   "reductions": [{"mode": "MEAN", "factor": 2, "position": 2}],
//!   "prediction": [{"kind": "LSTM", "hidden": 640}],
//!   "embed_dim": 256, "joint_dim": 640, "vocab": 1024
//! }
//! ```
//!
//! Layer keys `vec` (1), `residual` (false), `layernorm` ("NONE") and
//! `internally_stacked` (implied by the kind) are optional, as is `input_dim`,
//! which is checked against the resolved chain when present.

use std::fs;
use std::path::{Path, PathBuf};

use rnnt_memcost::arch::{
    validate_spec, CellKind, LayerDef, LayerNormMode, SpecError, TimeReductionSpec, TransducerSpec, ValidatedSpec,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed config: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{path}: invalid model:\n{source}")]
    Invalid { path: PathBuf, source: SpecError },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerJson {
    kind: CellKind,
    hidden: usize,
    #[serde(default = "one")]
    vec: usize,
    #[serde(default)]
    residual: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    internally_stacked: Option<bool>,
    #[serde(default)]
    layernorm: LayerNormMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_dim: Option<usize>,
}

impl From<&LayerJson> for LayerDef {
    fn from(l: &LayerJson) -> Self {
        LayerDef {
            kind: l.kind,
            layernorm: l.layernorm,
            hidden: l.hidden,
            vec: l.vec,
            residual: l.residual,
            internally_stacked: l.internally_stacked.unwrap_or(l.kind.is_internally_stacked()),
            input_dim: l.input_dim,
        }
    }
}

/// Published figures a fixture is compared against.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    /// Whole-network parameters, millions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network_params_m: Option<f64>,
    /// Encoder parameters, millions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder_params_m: Option<f64>,
    /// Off-chip traffic relative to the baseline model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offchip_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigJson {
    #[serde(rename = "_assumptions", default)]
    assumptions: Vec<String>,
    #[serde(rename = "_reference", default, skip_serializing_if = "Option::is_none")]
    reference: Option<Reference>,
    feature_dim: usize,
    encoder: Vec<LayerJson>,
    #[serde(default)]
    reductions: Vec<TimeReductionSpec>,
    #[serde(default)]
    prediction: Vec<LayerJson>,
    embed_dim: usize,
    joint_dim: usize,
    vocab: usize,
}

/// A parsed config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// File stem, e.g. `E7`.
    pub name: String,
    pub path: PathBuf,
    pub spec: TransducerSpec,
    pub assumptions: Vec<String>,
    pub reference: Option<Reference>,
}

impl ModelConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(path, &text)
    }

    pub fn parse(path: impl AsRef<Path>, text: &str) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let raw: ConfigJson =
            serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        let spec = TransducerSpec {
            feature_dim: raw.feature_dim,
            encoder: raw.encoder.iter().map(LayerDef::from).collect(),
            reductions: raw.reductions,
            prediction: raw.prediction.iter().map(LayerDef::from).collect(),
            embed_dim: raw.embed_dim,
            joint_dim: raw.joint_dim,
            vocab: raw.vocab,
        };
        let name = path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
        Ok(ModelConfig { name, path: path.into(), spec, assumptions: raw.assumptions, reference: raw.reference })
    }

    pub fn validated(&self) -> Result<ValidatedSpec, ConfigError> {
        validate_spec(&self.spec).map_err(|source| ConfigError::Invalid { path: self.path.clone(), source })
    }

    /// Pretty JSON in the same schema `parse` reads.
    pub fn to_json(&self) -> String {
        let layer = |d: &LayerDef| LayerJson {
            kind: d.kind,
            hidden: d.hidden,
            vec: d.vec,
            residual: d.residual,
            internally_stacked: (d.internally_stacked != d.kind.is_internally_stacked()).then_some(d.internally_stacked),
            layernorm: d.layernorm,
            input_dim: d.input_dim,
        };
        let raw = ConfigJson {
            assumptions: self.assumptions.clone(),
            reference: self.reference.clone(),
            feature_dim: self.spec.feature_dim,
            encoder: self.spec.encoder.iter().map(layer).collect(),
            reductions: self.spec.reductions.clone(),
            prediction: self.spec.prediction.iter().map(layer).collect(),
            embed_dim: self.spec.embed_dim,
            joint_dim: self.spec.joint_dim,
            vocab: self.spec.vocab,
        };
        serde_json::to_string_pretty(&raw).expect("config serializes")
    }
}
