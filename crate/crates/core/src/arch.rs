//! Architecture IR for recurrent-transducer models.
//!
//! A [`TransducerSpec`] is what a config file describes: an encoder stack with
//! time-reduction points, a prediction stack, and the joint/embedding sizes.
//! [`validate_spec`] resolves every layer's input width and checks the variant
//! rules, producing a [`ValidatedSpec`] that the rest of the crate consumes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Recurrent cell family.
///
/// The `*Residual` names mirror the variant taxonomy; whether a given layer
/// actually adds its input to its output is decided by [`LayerSpec::residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CellKind {
    #[cfg_attr(feature = "serde", serde(rename = "LSTM"))]
    Lstm,
    #[cfg_attr(feature = "serde", serde(rename = "LSTM_R"))]
    LstmResidual,
    #[cfg_attr(feature = "serde", serde(rename = "CIFG_R"))]
    CifgResidual,
    /// Internally stacked CIFG: the cell candidate passes through `W_ch`.
    #[cfg_attr(feature = "serde", serde(rename = "IS_CIFG_R"))]
    StackedCifgResidual,
    /// Internally stacked CIFG with an `H x V` matrix cell memory.
    #[cfg_attr(feature = "serde", serde(rename = "IS_2D_CIFG_R"))]
    Stacked2dCifgResidual,
    #[cfg_attr(feature = "serde", serde(rename = "SRU"))]
    Sru,
}

impl CellKind {
    pub const ALL: [CellKind; 6] = [
        CellKind::Lstm,
        CellKind::LstmResidual,
        CellKind::CifgResidual,
        CellKind::StackedCifgResidual,
        CellKind::Stacked2dCifgResidual,
        CellKind::Sru,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "LSTM",
            CellKind::LstmResidual => "LSTM_R",
            CellKind::CifgResidual => "CIFG_R",
            CellKind::StackedCifgResidual => "IS_CIFG_R",
            CellKind::Stacked2dCifgResidual => "IS_2D_CIFG_R",
            CellKind::Sru => "SRU",
        }
    }

    /// Number of `H`-row weight blocks stacked in `W_ih` (and `W_hh`).
    ///
    /// CIFG kinds drop the input gate (`i = 1 - f`). SRU stacks the candidate,
    /// forget and reset projections of `x`.
    pub fn gate_count(self) -> usize {
        match self {
            CellKind::Lstm | CellKind::LstmResidual => 4,
            CellKind::CifgResidual
            | CellKind::StackedCifgResidual
            | CellKind::Stacked2dCifgResidual
            | CellKind::Sru => 3,
        }
    }

    pub fn is_coupled(self) -> bool {
        matches!(
            self,
            CellKind::CifgResidual | CellKind::StackedCifgResidual | CellKind::Stacked2dCifgResidual
        )
    }

    pub fn is_internally_stacked(self) -> bool {
        matches!(self, CellKind::StackedCifgResidual | CellKind::Stacked2dCifgResidual)
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LayerNormMode {
    #[default]
    #[cfg_attr(feature = "serde", serde(rename = "NONE"))]
    None,
    /// Joint normalisation of all gate pre-activations plus the cell update.
    #[cfg_attr(feature = "serde", serde(rename = "FULL"))]
    Full,
    /// Normalise only the cell candidate and the cell update.
    #[cfg_attr(feature = "serde", serde(rename = "CELL_ONLY"))]
    CellOnly,
}

impl LayerNormMode {
    pub fn name(self) -> &'static str {
        match self {
            LayerNormMode::None => "NONE",
            LayerNormMode::Full => "FULL",
            LayerNormMode::CellOnly => "CELL_ONLY",
        }
    }
}

/// Lengths of the vectors each LayerNorm instance of a layer normalises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LnLayout {
    pub gates: Option<usize>,
    pub candidate: Option<usize>,
    pub cell: Option<usize>,
}

impl LnLayout {
    /// Gain plus bias for every instance.
    pub fn param_count(&self) -> usize {
        2 * (self.gates.unwrap_or(0) + self.candidate.unwrap_or(0) + self.cell.unwrap_or(0))
    }
}

/// A layer definition as written in a config: the input width may be left
/// for validation to derive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerDef {
    pub kind: CellKind,
    pub layernorm: LayerNormMode,
    pub hidden: usize,
    pub vec: usize,
    pub residual: bool,
    pub internally_stacked: bool,
    pub input_dim: Option<usize>,
}

impl LayerDef {
    pub fn new(kind: CellKind, hidden: usize) -> Self {
        LayerDef {
            kind,
            layernorm: LayerNormMode::None,
            hidden,
            vec: 1,
            residual: false,
            internally_stacked: kind.is_internally_stacked(),
            input_dim: None,
        }
    }

    pub fn with_vec(mut self, vec: usize) -> Self {
        self.vec = vec;
        self
    }

    pub fn with_layernorm(mut self, mode: LayerNormMode) -> Self {
        self.layernorm = mode;
        self
    }

    pub fn with_residual(mut self, residual: bool) -> Self {
        self.residual = residual;
        self
    }

    pub fn with_input_dim(mut self, input_dim: usize) -> Self {
        self.input_dim = Some(input_dim);
        self
    }
}

/// A fully resolved recurrent layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LayerSpec {
    pub kind: CellKind,
    pub layernorm: LayerNormMode,
    /// Hidden size `h`.
    pub hidden: usize,
    /// Number of cell-memory vectors `v`.
    pub vec: usize,
    pub input_dim: usize,
    pub residual: bool,
    pub internally_stacked: bool,
}

impl LayerSpec {
    pub fn new(kind: CellKind, input_dim: usize, hidden: usize) -> Self {
        LayerSpec {
            kind,
            layernorm: LayerNormMode::None,
            hidden,
            vec: 1,
            input_dim,
            residual: false,
            internally_stacked: kind.is_internally_stacked(),
        }
    }

    pub fn with_vec(mut self, vec: usize) -> Self {
        self.vec = vec;
        self
    }

    pub fn with_layernorm(mut self, mode: LayerNormMode) -> Self {
        self.layernorm = mode;
        self
    }

    pub fn with_residual(mut self, residual: bool) -> Self {
        self.residual = residual;
        self
    }

    pub fn output_dim(&self) -> usize {
        self.hidden * self.vec
    }

    /// Whether the layer carries the `W_ch` block.
    pub fn has_wch(&self) -> bool {
        self.kind != CellKind::Sru && (self.internally_stacked || self.vec > 1)
    }

    pub fn ln_layout(&self) -> LnLayout {
        let h = self.hidden;
        let hv = self.output_dim();
        match (self.kind, self.layernorm) {
            (_, LayerNormMode::None) => LnLayout::default(),
            (CellKind::Sru, _) => LnLayout { cell: Some(h), ..LnLayout::default() },
            (kind, LayerNormMode::Full) => LnLayout {
                gates: Some(kind.gate_count() * h),
                candidate: None,
                cell: Some(hv),
            },
            (_, LayerNormMode::CellOnly) => LnLayout {
                gates: None,
                candidate: Some(if self.has_wch() { hv } else { h }),
                cell: Some(hv),
            },
        }
    }

    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        for (field, value) in [("hidden", self.hidden), ("vec", self.vec), ("input_dim", self.input_dim)] {
            if value == 0 {
                out.push(Violation::new(
                    format!("{path}.{field}"),
                    ViolationKind::InvalidValue,
                    "must be positive",
                ));
            }
        }
        if self.vec > 1 && self.kind != CellKind::Stacked2dCifgResidual {
            out.push(Violation::new(
                format!("{path}.vec"),
                ViolationKind::IllegalVariant,
                format!("vec = {} is only legal on IS_2D_CIFG_R, kind is {}", self.vec, self.kind),
            ));
        }
        if self.internally_stacked != self.kind.is_internally_stacked() {
            let detail = if self.internally_stacked {
                format!("internally_stacked is forbidden on {}", self.kind)
            } else {
                format!("{} requires internally_stacked", self.kind)
            };
            out.push(Violation::new(
                format!("{path}.internally_stacked"),
                ViolationKind::IllegalVariant,
                detail,
            ));
        }
        if self.layernorm == LayerNormMode::Full
            && (self.kind == CellKind::Sru || self.kind.is_internally_stacked())
        {
            out.push(Violation::new(
                format!("{path}.layernorm"),
                ViolationKind::IllegalVariant,
                format!("FULL layernorm is not defined for {}", self.kind),
            ));
        }
        if self.kind == CellKind::Sru && self.input_dim != self.hidden {
            out.push(Violation::new(
                format!("{path}.input_dim"),
                ViolationKind::DimensionMismatch,
                format!("SRU needs input_dim == hidden, got {} vs {}", self.input_dim, self.hidden),
            ));
        }
        if self.residual && self.input_dim != self.output_dim() {
            out.push(Violation::new(
                format!("{path}.residual"),
                ViolationKind::ResidualDim,
                format!(
                    "residual needs input_dim == hidden*vec, got {} vs {}",
                    self.input_dim,
                    self.output_dim()
                ),
            ));
        }
    }

    /// Checks the single-layer rules (no chain context).
    pub fn validate(&self) -> Result<(), SpecError> {
        let mut v = Vec::new();
        self.check("layer", &mut v);
        if v.is_empty() {
            Ok(())
        } else {
            Err(SpecError(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ReductionMode {
    #[cfg_attr(feature = "serde", serde(rename = "CONCAT"))]
    Concat,
    #[cfg_attr(feature = "serde", serde(rename = "MEAN"))]
    Mean,
}

impl ReductionMode {
    pub fn name(self) -> &'static str {
        match self {
            ReductionMode::Concat => "CONCAT",
            ReductionMode::Mean => "MEAN",
        }
    }
}

/// Merges `factor` neighbouring frames; applied before encoder layer `position`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeReductionSpec {
    pub mode: ReductionMode,
    pub factor: usize,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransducerSpec {
    /// Features per 10 ms input frame.
    pub feature_dim: usize,
    pub encoder: Vec<LayerDef>,
    pub reductions: Vec<TimeReductionSpec>,
    pub prediction: Vec<LayerDef>,
    pub embed_dim: usize,
    pub joint_dim: usize,
    pub vocab: usize,
}

impl TransducerSpec {
    /// Copy with every reduction factor replaced by `factor`.
    pub fn with_reduction_factor(&self, factor: usize) -> TransducerSpec {
        let mut spec = self.clone();
        for r in &mut spec.reductions {
            r.factor = factor;
        }
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// The input-width chain does not close.
    DimensionMismatch,
    /// A field combination no cell variant allows.
    IllegalVariant,
    /// Residual connection between unequal widths.
    ResidualDim,
    InvalidValue,
}

impl ViolationKind {
    pub fn code(self) -> &'static str {
        match self {
            ViolationKind::DimensionMismatch => "DIMENSION_MISMATCH",
            ViolationKind::IllegalVariant => "ILLEGAL_VARIANT",
            ViolationKind::ResidualDim => "RESIDUAL_DIM",
            ViolationKind::InvalidValue => "INVALID_VALUE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Field path, e.g. `encoder[3].input_dim`.
    pub path: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl Violation {
    fn new(path: String, kind: ViolationKind, detail: impl Into<String>) -> Self {
        Violation { path, kind, detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.path, self.kind.code(), self.detail)
    }
}

/// Every violation found in a spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError(pub Vec<Violation>);

impl SpecError {
    pub fn violations(&self) -> &[Violation] {
        &self.0
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.0.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid model spec ({} violation(s))", self.0.len())?;
        for v in &self.0 {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl core::error::Error for SpecError {}

/// A spec whose dimension chain has been resolved and checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedSpec {
    feature_dim: usize,
    encoder: Vec<LayerSpec>,
    reductions: Vec<TimeReductionSpec>,
    prediction: Vec<LayerSpec>,
    embed_dim: usize,
    joint_dim: usize,
    vocab: usize,
}

impl ValidatedSpec {
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn encoder(&self) -> &[LayerSpec] {
        &self.encoder
    }

    /// Reductions in application order (stable by position).
    pub fn reductions(&self) -> &[TimeReductionSpec] {
        &self.reductions
    }

    pub fn reductions_at(&self, position: usize) -> impl Iterator<Item = &TimeReductionSpec> {
        self.reductions.iter().filter(move |r| r.position == position)
    }

    pub fn prediction(&self) -> &[LayerSpec] {
        &self.prediction
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn joint_dim(&self) -> usize {
        self.joint_dim
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn encoder_output_dim(&self) -> usize {
        self.encoder.last().map_or(self.feature_dim, LayerSpec::output_dim)
    }

    pub fn prediction_output_dim(&self) -> usize {
        self.prediction.last().map_or(self.embed_dim, LayerSpec::output_dim)
    }

    /// Product of every reduction factor.
    pub fn total_reduction(&self) -> u64 {
        self.reductions.iter().map(|r| r.factor as u64).product()
    }

    /// Back to the unresolved form, with every input width pinned.
    pub fn to_spec(&self) -> TransducerSpec {
        let def = |l: &LayerSpec| LayerDef {
            kind: l.kind,
            layernorm: l.layernorm,
            hidden: l.hidden,
            vec: l.vec,
            residual: l.residual,
            internally_stacked: l.internally_stacked,
            input_dim: Some(l.input_dim),
        };
        TransducerSpec {
            feature_dim: self.feature_dim,
            encoder: self.encoder.iter().map(def).collect(),
            reductions: self.reductions.clone(),
            prediction: self.prediction.iter().map(def).collect(),
            embed_dim: self.embed_dim,
            joint_dim: self.joint_dim,
            vocab: self.vocab,
        }
    }
}

fn resolve_stack(
    name: &str,
    defs: &[LayerDef],
    mut width: usize,
    reductions: &[TimeReductionSpec],
    out: &mut Vec<Violation>,
) -> Vec<LayerSpec> {
    let mut layers = Vec::with_capacity(defs.len());
    for (i, def) in defs.iter().enumerate() {
        for r in reductions.iter().filter(|r| r.position == i) {
            if r.mode == ReductionMode::Concat {
                width *= r.factor;
            }
        }
        let path = format!("{name}[{i}]");
        if let Some(declared) = def.input_dim {
            if declared != width {
                out.push(Violation::new(
                    format!("{path}.input_dim"),
                    ViolationKind::DimensionMismatch,
                    format!("declared {declared}, chain gives {width}"),
                ));
            }
        }
        let layer = LayerSpec {
            kind: def.kind,
            layernorm: def.layernorm,
            hidden: def.hidden,
            vec: def.vec,
            input_dim: width,
            residual: def.residual,
            internally_stacked: def.internally_stacked,
        };
        layer.check(&path, out);
        width = layer.output_dim();
        layers.push(layer);
    }
    layers
}

/// Resolves the dimension chain and checks every invariant, reporting all
/// violations at once.
pub fn validate_spec(spec: &TransducerSpec) -> Result<ValidatedSpec, SpecError> {
    let mut out = Vec::new();
    for (field, value) in [
        ("feature_dim", spec.feature_dim),
        ("embed_dim", spec.embed_dim),
        ("joint_dim", spec.joint_dim),
        ("vocab", spec.vocab),
    ] {
        if value == 0 {
            out.push(Violation::new(field.into(), ViolationKind::InvalidValue, "must be positive"));
        }
    }
    if spec.encoder.is_empty() {
        out.push(Violation::new(
            "encoder".into(),
            ViolationKind::InvalidValue,
            "needs at least one layer",
        ));
    }
    let mut reductions = spec.reductions.clone();
    for (i, r) in reductions.iter().enumerate() {
        if r.factor < 2 {
            out.push(Violation::new(
                format!("reductions[{i}].factor"),
                ViolationKind::InvalidValue,
                format!("factor must be >= 2, got {}", r.factor),
            ));
        }
        if r.position >= spec.encoder.len() {
            out.push(Violation::new(
                format!("reductions[{i}].position"),
                ViolationKind::InvalidValue,
                format!("position {} outside encoder of {} layers", r.position, spec.encoder.len()),
            ));
        }
    }
    reductions.sort_by_key(|r| r.position);

    let encoder = resolve_stack("encoder", &spec.encoder, spec.feature_dim, &reductions, &mut out);
    let prediction = resolve_stack("prediction", &spec.prediction, spec.embed_dim, &[], &mut out);

    if out.is_empty() {
        Ok(ValidatedSpec {
            feature_dim: spec.feature_dim,
            encoder,
            reductions,
            prediction,
            embed_dim: spec.embed_dim,
            joint_dim: spec.joint_dim,
            vocab: spec.vocab,
        })
    } else {
        Err(SpecError(out))
    }
}

/// Parameter count of each weight block of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ParamBlocks {
    pub w_ih: usize,
    pub w_hh: usize,
    pub w_ch: usize,
    pub bias: usize,
    pub layernorm: usize,
}

impl ParamBlocks {
    pub fn total(&self) -> usize {
        self.w_ih + self.w_hh + self.w_ch + self.bias + self.layernorm
    }

    /// Blocks that run inside the sequential recurrence.
    pub fn recurrent(&self) -> usize {
        self.w_hh + self.w_ch
    }

    /// Blocks fetched once per batch alongside `W_ih`.
    pub fn input_path(&self) -> usize {
        self.w_ih + self.bias + self.layernorm
    }

    /// Matrix entries; one MAC each per step.
    pub fn matrices(&self) -> usize {
        self.w_ih + self.w_hh + self.w_ch
    }
}

impl core::ops::Add for ParamBlocks {
    type Output = ParamBlocks;

    fn add(self, o: ParamBlocks) -> ParamBlocks {
        ParamBlocks {
            w_ih: self.w_ih + o.w_ih,
            w_hh: self.w_hh + o.w_hh,
            w_ch: self.w_ch + o.w_ch,
            bias: self.bias + o.bias,
            layernorm: self.layernorm + o.layernorm,
        }
    }
}

impl core::iter::Sum for ParamBlocks {
    fn sum<I: Iterator<Item = ParamBlocks>>(iter: I) -> ParamBlocks {
        iter.fold(ParamBlocks::default(), |a, b| a + b)
    }
}

pub fn layer_param_count(layer: &LayerSpec) -> ParamBlocks {
    let h = layer.hidden;
    let hv = layer.output_dim();
    let g = layer.kind.gate_count();
    let layernorm = layer.ln_layout().param_count();
    if layer.kind == CellKind::Sru {
        return ParamBlocks { w_ih: 3 * h * layer.input_dim, w_hh: 0, w_ch: 0, bias: 2 * h, layernorm };
    }
    ParamBlocks {
        w_ih: g * h * layer.input_dim,
        w_hh: g * h * hv,
        w_ch: if layer.has_wch() { hv * h } else { 0 },
        bias: g * h,
        layernorm,
    }
}

/// Joint network: `[enc; pred] -> joint_dim -> vocab`, each with a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct JointParams {
    pub hidden: usize,
    pub output: usize,
    pub bias: usize,
}

impl JointParams {
    pub fn total(&self) -> usize {
        self.hidden + self.output + self.bias
    }
}

pub fn joint_param_count(spec: &ValidatedSpec) -> JointParams {
    let j = spec.joint_dim();
    JointParams {
        hidden: (spec.encoder_output_dim() + spec.prediction_output_dim()) * j,
        output: j * spec.vocab(),
        bias: j + spec.vocab(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ParamReport {
    pub encoder_layers: Vec<ParamBlocks>,
    pub prediction_layers: Vec<ParamBlocks>,
    pub joint: JointParams,
    pub encoder: usize,
    pub prediction: usize,
    pub embedding: usize,
    pub joint_total: usize,
    /// Encoder weight matrices only (no bias / LayerNorm).
    pub encoder_matrices: usize,
    pub total: usize,
}

pub fn model_param_count(spec: &ValidatedSpec) -> ParamReport {
    let encoder_layers: Vec<_> = spec.encoder().iter().map(layer_param_count).collect();
    let prediction_layers: Vec<_> = spec.prediction().iter().map(layer_param_count).collect();
    let encoder = encoder_layers.iter().map(ParamBlocks::total).sum();
    let prediction = prediction_layers.iter().map(ParamBlocks::total).sum();
    let encoder_matrices = encoder_layers.iter().map(ParamBlocks::matrices).sum();
    let embedding = spec.vocab() * spec.embed_dim();
    let joint = joint_param_count(spec);
    let joint_total = joint.total();
    ParamReport {
        encoder_layers,
        prediction_layers,
        joint,
        encoder,
        prediction,
        embedding,
        joint_total,
        encoder_matrices,
        total: encoder + prediction + embedding + joint_total,
    }
}

/// Fraction of input frames reaching a layer, held as `1 / divisor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FrameRate {
    pub divisor: u64,
}

impl FrameRate {
    pub fn as_f64(self) -> f64 {
        1.0 / self.divisor as f64
    }
}

pub fn frame_rate_profile(spec: &ValidatedSpec) -> Vec<FrameRate> {
    let mut divisor = 1u64;
    (0..spec.encoder().len())
        .map(|i| {
            for r in spec.reductions_at(i) {
                divisor *= r.factor as u64;
            }
            FrameRate { divisor }
        })
        .collect()
}

/// Bytes needed to keep the layer's recurrent block (`W_hh` + `W_ch`) resident.
pub fn working_set(layer: &LayerSpec, bytes_per_param: u64) -> u64 {
    layer_param_count(layer).recurrent() as u64 * bytes_per_param
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lstm_stack(n: usize, h: usize, mode: ReductionMode) -> TransducerSpec {
        TransducerSpec {
            feature_dim: 80,
            encoder: (0..n).map(|_| LayerDef::new(CellKind::Lstm, h)).collect(),
            reductions: vec![
                TimeReductionSpec { mode, factor: 2, position: 2 },
                TimeReductionSpec { mode, factor: 2, position: 5 },
            ],
            prediction: vec![],
            embed_dim: 64,
            joint_dim: 64,
            vocab: 32,
        }
    }

    #[test]
    fn baseline_chain_resolves() {
        let v = validate_spec(&lstm_stack(8, 640, ReductionMode::Concat)).unwrap();
        let dims: Vec<_> = v.encoder().iter().map(|l| l.input_dim).collect();
        assert_eq!(dims, [80, 640, 1280, 640, 640, 1280, 640, 640]);
        let mean = validate_spec(&lstm_stack(8, 640, ReductionMode::Mean)).unwrap();
        let dims: Vec<_> = mean.encoder().iter().map(|l| l.input_dim).collect();
        assert_eq!(dims, [80, 640, 640, 640, 640, 640, 640, 640]);
    }

    #[test]
    fn residual_with_unequal_dims() {
        let layer = LayerSpec::new(CellKind::Lstm, 512, 640).with_residual(true);
        let err = layer.validate().unwrap_err();
        assert!(err.has(ViolationKind::ResidualDim));
    }

    #[test]
    fn vec_on_plain_lstm_is_illegal() {
        let layer = LayerSpec::new(CellKind::Lstm, 8, 8).with_vec(2);
        assert!(layer.validate().unwrap_err().has(ViolationKind::IllegalVariant));
        let mut spec = lstm_stack(3, 16, ReductionMode::Mean);
        spec.reductions.clear();
        spec.encoder[1].vec = 2;
        let err = validate_spec(&spec).unwrap_err();
        assert_eq!(err.violations()[0].path, "encoder[1].vec");
    }

    #[test]
    fn stacking_flag_must_match_kind() {
        let mut layer = LayerSpec::new(CellKind::CifgResidual, 8, 8);
        layer.internally_stacked = true;
        assert!(layer.validate().unwrap_err().has(ViolationKind::IllegalVariant));
        let mut layer = LayerSpec::new(CellKind::StackedCifgResidual, 8, 8);
        layer.internally_stacked = false;
        assert!(layer.validate().unwrap_err().has(ViolationKind::IllegalVariant));
    }

    #[test]
    fn sru_rejects_full_layernorm() {
        let layer = LayerSpec::new(CellKind::Sru, 8, 8).with_layernorm(LayerNormMode::Full);
        assert!(layer.validate().unwrap_err().has(ViolationKind::IllegalVariant));
        let ok = LayerSpec::new(CellKind::Sru, 8, 8).with_layernorm(LayerNormMode::CellOnly);
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn declared_input_dim_must_close_chain() {
        let mut spec = lstm_stack(8, 32, ReductionMode::Concat);
        spec.encoder[2].input_dim = Some(32);
        let err = validate_spec(&spec).unwrap_err();
        assert!(err.has(ViolationKind::DimensionMismatch));
        assert_eq!(err.violations().len(), 1);
        assert_eq!(err.violations()[0].path, "encoder[2].input_dim");
    }

    #[test]
    fn bad_reduction_reported() {
        let mut spec = lstm_stack(4, 32, ReductionMode::Mean);
        spec.reductions[0].factor = 1;
        spec.reductions[1].position = 9;
        let err = validate_spec(&spec).unwrap_err();
        assert_eq!(err.violations().len(), 2);
    }

    #[test]
    fn block_counts_match_enumeration() {
        let lstm = layer_param_count(&LayerSpec::new(CellKind::Lstm, 4, 3));
        assert_eq!((lstm.w_ih, lstm.w_hh, lstm.w_ch, lstm.bias), (48, 36, 0, 12));
        assert_eq!(lstm.total(), 96);

        let cell2d = layer_param_count(&LayerSpec::new(CellKind::Stacked2dCifgResidual, 4, 2).with_vec(2));
        assert_eq!((cell2d.w_ih, cell2d.w_hh, cell2d.w_ch, cell2d.bias), (24, 24, 8, 6));
        assert_eq!(cell2d.total(), 62);

        let sru = layer_param_count(&LayerSpec::new(CellKind::Sru, 3, 3));
        assert_eq!((sru.w_ih, sru.w_hh, sru.bias), (27, 0, 6));
        assert_eq!(sru.total(), 33);
    }

    #[test]
    fn layernorm_counts() {
        let full = LayerSpec::new(CellKind::Lstm, 4, 3).with_layernorm(LayerNormMode::Full);
        assert_eq!(layer_param_count(&full).layernorm, 2 * (12 + 3));
        let cell = LayerSpec::new(CellKind::Lstm, 640, 640).with_layernorm(LayerNormMode::CellOnly);
        assert_eq!(layer_param_count(&cell).layernorm, 2560);
        let two_d = LayerSpec::new(CellKind::Stacked2dCifgResidual, 4, 2)
            .with_vec(2)
            .with_layernorm(LayerNormMode::CellOnly);
        assert_eq!(layer_param_count(&two_d).layernorm, 2 * (4 + 4));
    }

    #[test]
    fn baseline_encoder_gate_blocks() {
        let v = validate_spec(&lstm_stack(8, 640, ReductionMode::Concat)).unwrap();
        let p = model_param_count(&v);
        assert_eq!(p.encoder_matrices, 28_057_600);
    }

    #[test]
    fn empty_prediction_stack() {
        let v = validate_spec(&lstm_stack(6, 16, ReductionMode::Mean)).unwrap();
        let p = model_param_count(&v);
        assert_eq!(p.prediction, 0);
        assert_eq!(p.joint.hidden, (16 + 64) * 64);
        assert_eq!(p.total, p.encoder + p.prediction + p.embedding + p.joint_total);
    }

    #[test]
    fn frame_rates() {
        let v = validate_spec(&lstm_stack(8, 16, ReductionMode::Mean)).unwrap();
        let d: Vec<_> = frame_rate_profile(&v).iter().map(|r| r.divisor).collect();
        assert_eq!(d, [1, 1, 2, 2, 2, 4, 4, 4]);

        let mut spec = lstm_stack(8, 16, ReductionMode::Mean);
        spec.reductions = vec![
            TimeReductionSpec { mode: ReductionMode::Mean, factor: 2, position: 3 },
            TimeReductionSpec { mode: ReductionMode::Mean, factor: 2, position: 6 },
        ];
        let v = validate_spec(&spec).unwrap();
        let r: Vec<_> = frame_rate_profile(&v).iter().map(|r| r.as_f64()).collect();
        assert_eq!(r, [1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.25, 0.25]);

        spec.reductions.clear();
        let v = validate_spec(&spec).unwrap();
        assert!(frame_rate_profile(&v).iter().all(|r| r.divisor == 1));

        spec.reductions = vec![TimeReductionSpec { mode: ReductionMode::Mean, factor: 4, position: 1 }];
        let v = validate_spec(&spec).unwrap();
        let r: Vec<_> = frame_rate_profile(&v).iter().map(|r| r.as_f64()).collect();
        assert_eq!(&r[..2], [1.0, 0.25]);
    }

    #[test]
    fn working_sets() {
        assert_eq!(working_set(&LayerSpec::new(CellKind::Lstm, 640, 640), 1), 1_638_400);
        assert_eq!(working_set(&LayerSpec::new(CellKind::Sru, 777, 777), 4), 0);
        let e7 = LayerSpec::new(CellKind::Stacked2dCifgResidual, 400, 200).with_vec(2);
        assert_eq!(working_set(&e7, 1), 320_000);
    }

    #[test]
    fn revalidation_is_identity() {
        let v = validate_spec(&lstm_stack(8, 64, ReductionMode::Concat)).unwrap();
        assert_eq!(validate_spec(&v.to_spec()).unwrap(), v);
    }
}
