//! Closed-form off-chip traffic, compute and energy of a model under a schedule.
//!
//! Batching is layer-local: each layer buffers `B` of its own timesteps, so a
//! layer running at rate `1/D` fetches its input path once per `B*D` input
//! frames. Its recurrent block (`W_hh` + `W_ch`) is either pinned for the whole
//! batch (when it fits the buffer on its own) or refetched every step.
//!
//! Byte figures are exact rationals; the `f64` accessors exist for display.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;

use crate::arch::{
    frame_rate_profile, layer_param_count, working_set, CellKind, FrameRate, ValidatedSpec,
};
use crate::blocks::{decoder_blocks, layer_blocks, BlockId, Site};

/// Exact byte (or MAC) count.
pub type Exact = Ratio<u128>;

pub fn to_f64(x: &Exact) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

#[cfg(feature = "serde")]
fn ser_exact<S: serde::Serializer>(x: &Exact, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(to_f64(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleError {
    ZeroBatch,
    ZeroBytesPerParam,
    ZeroDecoderReuse,
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleError::ZeroBatch => "batch factor must be >= 1",
            ScheduleError::ZeroBytesPerParam => "bytes per parameter must be >= 1",
            ScheduleError::ZeroDecoderReuse => "decoder reuse must be >= 1",
        })
    }
}

impl core::error::Error for ScheduleError {}

/// Execution plan: batch factor, buffer budget, storage width and decoder reuse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Schedule {
    batch: u64,
    buffer_bytes: u64,
    bytes_per_param: u64,
    decoder_reuse: u64,
}

impl Schedule {
    /// Decoder reuse starts at 1.
    pub fn new(batch: u64, buffer_bytes: u64, bytes_per_param: u64) -> Result<Self, ScheduleError> {
        if batch == 0 {
            return Err(ScheduleError::ZeroBatch);
        }
        if bytes_per_param == 0 {
            return Err(ScheduleError::ZeroBytesPerParam);
        }
        Ok(Schedule { batch, buffer_bytes, bytes_per_param, decoder_reuse: 1 })
    }

    pub fn with_decoder_reuse(mut self, reuse: u64) -> Result<Self, ScheduleError> {
        if reuse == 0 {
            return Err(ScheduleError::ZeroDecoderReuse);
        }
        self.decoder_reuse = reuse;
        Ok(self)
    }

    pub fn with_batch(self, batch: u64) -> Result<Self, ScheduleError> {
        Schedule::new(batch, self.buffer_bytes, self.bytes_per_param)?.with_decoder_reuse(self.decoder_reuse)
    }

    pub fn with_buffer_bytes(mut self, buffer_bytes: u64) -> Self {
        self.buffer_bytes = buffer_bytes;
        self
    }

    pub fn batch(&self) -> u64 {
        self.batch
    }

    pub fn buffer_bytes(&self) -> u64 {
        self.buffer_bytes
    }

    pub fn bytes_per_param(&self) -> u64 {
        self.bytes_per_param
    }

    pub fn decoder_reuse(&self) -> u64 {
        self.decoder_reuse
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyError {
    NonFinite,
    Negative,
    /// On-chip bytes may not cost more than off-chip bytes.
    OnChipAboveOffChip,
}

impl fmt::Display for EnergyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyError::NonFinite => "energy constants must be finite",
            EnergyError::Negative => "energy constants must be non-negative",
            EnergyError::OnChipAboveOffChip => "on-chip byte energy exceeds off-chip byte energy",
        })
    }
}

impl core::error::Error for EnergyError {}

/// Relative energy per MAC, per on-chip byte and per off-chip byte.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EnergyModel {
    mac: f64,
    on_chip: f64,
    off_chip: f64,
}

impl EnergyModel {
    pub fn new(mac: f64, on_chip: f64, off_chip: f64) -> Result<Self, EnergyError> {
        if !(mac.is_finite() && on_chip.is_finite() && off_chip.is_finite()) {
            return Err(EnergyError::NonFinite);
        }
        if mac < 0.0 || on_chip < 0.0 {
            return Err(EnergyError::Negative);
        }
        if off_chip < on_chip {
            return Err(EnergyError::OnChipAboveOffChip);
        }
        Ok(EnergyModel { mac, on_chip, off_chip })
    }

    pub fn mac(&self) -> f64 {
        self.mac
    }

    pub fn on_chip(&self) -> f64 {
        self.on_chip
    }

    pub fn off_chip(&self) -> f64 {
        self.off_chip
    }
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel { mac: 1.0, on_chip: 1.0, off_chip: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum Path {
    Input,
    Recurrent,
    Decoder,
}

impl Path {
    pub fn name(self) -> &'static str {
        match self {
            Path::Input => "input",
            Path::Recurrent => "recurrent",
            Path::Decoder => "decoder",
        }
    }
}

/// Analytical traffic of one weight block.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BlockCost {
    pub id: BlockId,
    pub path: Path,
    pub params: u64,
    /// Bytes moved by one fetch of the whole block.
    pub fetch_bytes: u64,
    /// Fetches per batch (per `C_d` symbols for decoder blocks).
    pub fetches_per_batch: u64,
    /// Per input frame for encoder blocks, per symbol for decoder blocks.
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub bytes_per_unit: Exact,
}

impl BlockCost {
    /// Upper bound on the gap a trailing partial batch can leave.
    pub fn batch_bytes(&self) -> u64 {
        self.fetch_bytes * self.fetches_per_batch
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LayerCost {
    pub index: usize,
    pub kind: CellKind,
    pub rate: FrameRate,
    pub working_set: u64,
    pub pinned: bool,
    pub blocks: Vec<BlockCost>,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub input_path: Exact,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub recurrent_path: Exact,
}

impl LayerCost {
    pub fn bytes_per_frame(&self) -> Exact {
        self.input_path + self.recurrent_path
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EncoderAccess {
    pub layers: Vec<LayerCost>,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub bytes_per_frame: Exact,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DecoderAccess {
    pub blocks: Vec<BlockCost>,
    /// Whole decoder bytes.
    pub total_bytes: u64,
    /// Whether the whole decoder fits the buffer, enabling `C_d` reuse.
    pub resident: bool,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub bytes_per_symbol: Exact,
}

fn exact(n: u64) -> Exact {
    Exact::from_integer(n as u128)
}

pub fn encoder_access(spec: &ValidatedSpec, sched: &Schedule) -> EncoderAccess {
    let bpp = sched.bytes_per_param();
    let b = sched.batch();
    let rates = frame_rate_profile(spec);
    let layers: Vec<LayerCost> = spec
        .encoder()
        .iter()
        .zip(rates)
        .enumerate()
        .map(|(i, (layer, rate))| {
            let ws = working_set(layer, bpp);
            let pinned = ws <= sched.buffer_bytes();
            let mut input_path = Exact::from_integer(0);
            let mut recurrent_path = Exact::from_integer(0);
            let blocks = layer_blocks(&layer_param_count(layer))
                .into_iter()
                .map(|(kind, n)| {
                    let fetch_bytes = n as u64 * bpp;
                    let recurrent = kind.is_recurrent();
                    let per_batch = if recurrent && !pinned { b } else { 1 };
                    let bytes_per_unit = Exact::new((fetch_bytes * per_batch) as u128, (b * rate.divisor) as u128);
                    if recurrent {
                        recurrent_path += bytes_per_unit;
                    } else {
                        input_path += bytes_per_unit;
                    }
                    BlockCost {
                        id: BlockId::new(Site::Encoder(i), kind),
                        path: if recurrent { Path::Recurrent } else { Path::Input },
                        params: n as u64,
                        fetch_bytes,
                        fetches_per_batch: per_batch,
                        bytes_per_unit,
                    }
                })
                .collect();
            LayerCost { index: i, kind: layer.kind, rate, working_set: ws, pinned, blocks, input_path, recurrent_path }
        })
        .collect();
    let bytes_per_frame = layers.iter().map(LayerCost::bytes_per_frame).sum();
    EncoderAccess { layers, bytes_per_frame }
}

pub fn decoder_access(spec: &ValidatedSpec, sched: &Schedule) -> DecoderAccess {
    let bpp = sched.bytes_per_param();
    let raw = decoder_blocks(spec);
    let total_bytes: u64 = raw.iter().map(|&(_, n)| n as u64 * bpp).sum();
    let resident = total_bytes <= sched.buffer_bytes();
    let reuse = if resident { sched.decoder_reuse() } else { 1 };
    let blocks: Vec<BlockCost> = raw
        .into_iter()
        .map(|(id, n)| {
            let fetch_bytes = n as u64 * bpp;
            BlockCost {
                id,
                path: Path::Decoder,
                params: n as u64,
                fetch_bytes,
                fetches_per_batch: 1,
                bytes_per_unit: Exact::new(fetch_bytes as u128, reuse as u128),
            }
        })
        .collect();
    let bytes_per_symbol = blocks.iter().map(|b| b.bytes_per_unit).sum();
    DecoderAccess { blocks, total_bytes, resident, bytes_per_symbol }
}

/// Multiply-accumulates; schedule-invariant.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ComputeCount {
    /// MACs of one step of each encoder layer.
    pub encoder_layer_step: Vec<u64>,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub per_frame: Exact,
    pub prediction_per_symbol: u64,
    pub joint_per_symbol: u64,
}

impl ComputeCount {
    pub fn per_symbol(&self) -> u64 {
        self.prediction_per_symbol + self.joint_per_symbol
    }
}

pub fn compute_count(spec: &ValidatedSpec) -> ComputeCount {
    let encoder_layer_step: Vec<u64> =
        spec.encoder().iter().map(|l| layer_param_count(l).matrices() as u64).collect();
    let per_frame = encoder_layer_step
        .iter()
        .zip(frame_rate_profile(spec))
        .map(|(&m, r)| Exact::new(m as u128, r.divisor as u128))
        .sum();
    let prediction_per_symbol = spec.prediction().iter().map(|l| layer_param_count(l).matrices() as u64).sum();
    let joint = crate::arch::joint_param_count(spec);
    ComputeCount {
        encoder_layer_step,
        per_frame,
        prediction_per_symbol,
        joint_per_symbol: (joint.hidden + joint.output) as u64,
    }
}

/// Parameter bytes touched by compute: every encoder parameter per step, and
/// per symbol one embedding row plus the whole prediction and joint networks.
fn on_chip_traffic(spec: &ValidatedSpec, bpp: u64) -> (Exact, u64) {
    let per_frame = spec
        .encoder()
        .iter()
        .zip(frame_rate_profile(spec))
        .map(|(l, r)| Exact::new((layer_param_count(l).total() as u64 * bpp) as u128, r.divisor as u128))
        .sum();
    let prediction: usize = spec.prediction().iter().map(|l| layer_param_count(l).total()).sum();
    let joint = crate::arch::joint_param_count(spec).total();
    (per_frame, (prediction + joint + spec.embed_dim()) as u64 * bpp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EnergyBreakdown {
    pub compute: f64,
    pub on_chip: f64,
    pub off_chip: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.compute + self.on_chip + self.off_chip
    }

    /// `(compute, on_chip, off_chip)` shares of the total; zeros when the total is zero.
    pub fn fractions(&self) -> (f64, f64, f64) {
        let t = self.total();
        if t == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        (self.compute / t, self.on_chip / t, self.off_chip / t)
    }
}

/// Full analytical picture for an utterance of `frames` input frames and `symbols` emitted symbols.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CostReport {
    pub schedule: Schedule,
    pub frames: u64,
    pub symbols: u64,
    pub encoder: EncoderAccess,
    pub decoder: DecoderAccess,
    pub compute: ComputeCount,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub on_chip_per_frame: Exact,
    pub on_chip_per_symbol: u64,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub encoder_bytes: Exact,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub decoder_bytes: Exact,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub off_chip_bytes: Exact,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub on_chip_bytes: Exact,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub macs: Exact,
    pub energy_model: EnergyModel,
    pub energy: EnergyBreakdown,
}

impl CostReport {
    /// Analytical bytes of every block over the whole utterance.
    pub fn expected_bytes(&self) -> BTreeMap<BlockId, Exact> {
        let mut out = BTreeMap::new();
        for b in self.encoder.layers.iter().flat_map(|l| &l.blocks) {
            out.insert(b.id, b.bytes_per_unit * exact(self.frames));
        }
        for b in &self.decoder.blocks {
            out.insert(b.id, b.bytes_per_unit * exact(self.symbols));
        }
        out
    }

    pub fn blocks(&self) -> impl Iterator<Item = &BlockCost> {
        self.encoder.layers.iter().flat_map(|l| &l.blocks).chain(&self.decoder.blocks)
    }

    pub fn pinned_layers(&self) -> usize {
        self.encoder.layers.iter().filter(|l| l.pinned).count()
    }
}

pub fn energy_estimate(report: &CostReport, e: &EnergyModel) -> EnergyBreakdown {
    EnergyBreakdown {
        compute: to_f64(&report.macs) * e.mac(),
        on_chip: to_f64(&report.on_chip_bytes) * e.on_chip(),
        off_chip: to_f64(&report.off_chip_bytes) * e.off_chip(),
    }
}

pub fn cost_report(spec: &ValidatedSpec, sched: &Schedule, frames: u64, symbols: u64, e: &EnergyModel) -> CostReport {
    let encoder = encoder_access(spec, sched);
    let decoder = decoder_access(spec, sched);
    let compute = compute_count(spec);
    let (on_chip_per_frame, on_chip_per_symbol) = on_chip_traffic(spec, sched.bytes_per_param());
    let t = exact(frames);
    let s = exact(symbols);
    let encoder_bytes = encoder.bytes_per_frame * t;
    let decoder_bytes = decoder.bytes_per_symbol * s;
    let macs = compute.per_frame * t + exact(compute.per_symbol()) * s;
    let on_chip_bytes = on_chip_per_frame * t + exact(on_chip_per_symbol) * s;
    let mut report = CostReport {
        schedule: *sched,
        frames,
        symbols,
        encoder,
        decoder,
        compute,
        on_chip_per_frame,
        on_chip_per_symbol,
        encoder_bytes,
        decoder_bytes,
        off_chip_bytes: encoder_bytes + decoder_bytes,
        on_chip_bytes,
        macs,
        energy_model: *e,
        energy: EnergyBreakdown { compute: 0.0, on_chip: 0.0, off_chip: 0.0 },
    };
    report.energy = energy_estimate(&report, e);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{validate_spec, LayerDef, LayerNormMode, TransducerSpec};
    use alloc::vec;

    fn single(kind: CellKind, h: usize, ln: LayerNormMode) -> ValidatedSpec {
        validate_spec(&TransducerSpec {
            feature_dim: h,
            encoder: vec![LayerDef::new(kind, h).with_layernorm(ln)],
            reductions: vec![],
            prediction: vec![],
            embed_dim: 8,
            joint_dim: 8,
            vocab: 8,
        })
        .unwrap()
    }

    fn sched(b: u64, buf: u64) -> Schedule {
        Schedule::new(b, buf, 1).unwrap()
    }

    #[test]
    fn lstm_640_examples() {
        let spec = single(CellKind::Lstm, 640, LayerNormMode::CellOnly);
        assert_eq!(encoder_access(&spec, &sched(1, 0)).bytes_per_frame, exact(3_281_920));
        assert_eq!(encoder_access(&spec, &sched(8, 1_638_400)).bytes_per_frame, exact(410_240));
        let streamed = encoder_access(&spec, &sched(8, 0));
        assert_eq!(streamed.bytes_per_frame, exact(1_843_840));
        assert_eq!(streamed.layers[0].recurrent_path, exact(1_638_400));
        // One byte short of the working set: streamed.
        assert!(!encoder_access(&spec, &sched(8, 1_638_399)).layers[0].pinned);
    }

    #[test]
    fn compute_examples() {
        let spec = single(CellKind::Lstm, 640, LayerNormMode::None);
        assert_eq!(compute_count(&spec).per_frame, exact(3_276_800));
        let sru = validate_spec(&TransducerSpec {
            feature_dim: 4,
            encoder: vec![LayerDef::new(CellKind::Lstm, 4)],
            reductions: vec![],
            prediction: vec![LayerDef::new(CellKind::Sru, 768)],
            embed_dim: 768,
            joint_dim: 8,
            vocab: 8,
        })
        .unwrap();
        assert_eq!(compute_count(&sru).prediction_per_symbol, 1_769_472);
    }

    #[test]
    fn decoder_reuse_needs_residency() {
        let spec = single(CellKind::Lstm, 16, LayerNormMode::None);
        let total = decoder_access(&spec, &sched(1, 0)).total_bytes;
        let s = sched(1, 512 * 1024).with_decoder_reuse(4).unwrap();
        assert_eq!(decoder_access(&spec, &s).bytes_per_symbol, Exact::new(total as u128, 4));
        let s = sched(1, 0).with_decoder_reuse(4).unwrap();
        assert_eq!(decoder_access(&spec, &s).bytes_per_symbol, exact(total));
    }

    #[test]
    fn zero_workload_and_linearity() {
        let spec = single(CellKind::Lstm, 32, LayerNormMode::Full);
        let e = EnergyModel::default();
        let zero = cost_report(&spec, &sched(8, 0), 0, 0, &e);
        assert_eq!(zero.off_chip_bytes, exact(0));
        assert_eq!(zero.energy.total(), 0.0);
        let a = cost_report(&spec, &sched(8, 0), 100, 7, &e);
        let b = cost_report(&spec, &sched(8, 0), 200, 7, &e);
        assert_eq!(b.encoder_bytes, a.encoder_bytes * exact(2));
        assert_eq!(b.decoder_bytes, a.decoder_bytes);
    }

    #[test]
    fn energy_scaling() {
        let spec = single(CellKind::Lstm, 32, LayerNormMode::None);
        let r = cost_report(&spec, &sched(1, 0), 10, 2, &EnergyModel::default());
        let free = energy_estimate(&r, &EnergyModel::new(1.0, 0.0, 0.0).unwrap());
        assert_eq!(free.off_chip, 0.0);
        assert_eq!(free.total(), free.compute);
        let double = energy_estimate(&r, &EnergyModel::new(1.0, 1.0, 200.0).unwrap());
        assert_eq!(double.off_chip, 2.0 * r.energy.off_chip);
    }

    #[test]
    fn invalid_constructors() {
        assert_eq!(Schedule::new(0, 0, 1), Err(ScheduleError::ZeroBatch));
        assert_eq!(Schedule::new(1, 0, 0), Err(ScheduleError::ZeroBytesPerParam));
        assert_eq!(sched(1, 0).with_decoder_reuse(0), Err(ScheduleError::ZeroDecoderReuse));
        assert_eq!(EnergyModel::new(1.0, 5.0, 2.0), Err(EnergyError::OnChipAboveOffChip));
        assert_eq!(EnergyModel::new(-1.0, 0.0, 0.0), Err(EnergyError::Negative));
        assert_eq!(EnergyModel::new(f64::NAN, 0.0, 0.0), Err(EnergyError::NonFinite));
    }
}
