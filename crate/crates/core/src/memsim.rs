//! Instrumented execution of a schedule with a simulated on-chip buffer.
//!
//! Frames stream through per-layer queues. A layer runs a batch as soon as its
//! queue holds `B` frames; at end of input every queue is flushed in layer
//! order, so trailing batches run at their actual size. During a batch the
//! layer's input-path blocks stream through a zero-size staging tile and its
//! recurrent block is either resident (loaded once) or refetched every step.
//! Only one layer's recurrent block is resident at a time. The decoder runs
//! after the encoder and is resident for `C_d` symbols when it fits.
//!
//! [`simulate`] runs the real cells; [`simulate_counts`] replays the same
//! schedule without arithmetic, sizing blocks from the architecture.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::arch::{layer_param_count, ParamBlocks, TimeReductionSpec, ValidatedSpec};
use crate::blocks::{decoder_blocks, layer_blocks, BlockId, BlockKind, Site};
use crate::cells::{
    decode_symbol, reduce_group, run_layer_step, CellError, CellState, CellWeights, DecoderState, ModelWeights,
    Vector,
};
use crate::costmodel::{BlockCost, CostReport, Exact, Schedule};

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    WeightShapeMismatch(CellError),
    Numeric(CellError),
    CapacityExceeded { block: BlockId, needed: u64, capacity: u64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::WeightShapeMismatch(e) => write!(f, "WEIGHT_SHAPE_MISMATCH: {e}"),
            SimError::Numeric(e) => write!(f, "{e}"),
            SimError::CapacityExceeded { block, needed, capacity } => {
                write!(f, "loading {block} needs {needed} resident bytes, buffer holds {capacity}")
            }
        }
    }
}

impl core::error::Error for SimError {}

impl From<CellError> for SimError {
    fn from(e: CellError) -> Self {
        SimError::Numeric(e)
    }
}

/// Simulated on-chip buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BufferState {
    capacity: u64,
    resident: BTreeMap<BlockId, u64>,
    used: u64,
    peak: u64,
}

impl BufferState {
    pub fn new(capacity: u64) -> Self {
        BufferState { capacity, resident: BTreeMap::new(), used: 0, peak: 0 }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn peak(&self) -> u64 {
        self.peak
    }

    pub fn is_resident(&self, id: &BlockId) -> bool {
        self.resident.contains_key(id)
    }

    pub fn load(&mut self, id: BlockId, bytes: u64) -> Result<(), SimError> {
        if self.resident.contains_key(&id) {
            return Ok(());
        }
        let needed = self.used + bytes;
        if needed > self.capacity {
            return Err(SimError::CapacityExceeded { block: id, needed, capacity: self.capacity });
        }
        self.resident.insert(id, bytes);
        self.used = needed;
        self.peak = self.peak.max(needed);
        Ok(())
    }

    pub fn evict_all(&mut self) {
        self.resident.clear();
        self.used = 0;
    }
}

/// One log line: all fetches of `block` during one batch.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TraceEvent {
    /// Batch ordinal of the owning layer (or decoder group).
    pub batch: u64,
    pub block: BlockId,
    pub fetches: u64,
    pub bytes: u64,
    pub pinned: bool,
}

/// Every off-chip parameter byte the simulation fetched.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AccessTrace {
    pub per_block: BTreeMap<BlockId, u64>,
    pub log: Vec<TraceEvent>,
    pub encoder_macs: u64,
    pub decoder_macs: u64,
    pub peak_resident: u64,
}

impl AccessTrace {
    pub fn total_bytes(&self) -> u64 {
        self.per_block.values().sum()
    }

    pub fn encoder_bytes(&self) -> u64 {
        self.per_block.iter().filter(|(id, _)| matches!(id.site, Site::Encoder(_))).map(|(_, b)| b).sum()
    }

    pub fn decoder_bytes(&self) -> u64 {
        self.total_bytes() - self.encoder_bytes()
    }

    pub fn macs(&self) -> u64 {
        self.encoder_macs + self.decoder_macs
    }

    fn record(&mut self, batch: u64, block: BlockId, fetches: u64, bytes_each: u64, pinned: bool) {
        let bytes = fetches * bytes_each;
        *self.per_block.entry(block).or_insert(0) += bytes;
        self.log.push(TraceEvent { batch, block, fetches, bytes, pinned });
    }
}

/// What the engine needs from an execution backend.
trait Executor {
    type Frame: Clone;

    fn layer_blocks(&self, layer: usize) -> ParamBlocks;
    fn decoder_blocks(&self) -> Vec<(BlockId, usize)>;
    fn layer_step(&mut self, layer: usize, x: Self::Frame) -> Result<Self::Frame, SimError>;
    fn reduce(&mut self, r: &TimeReductionSpec, group: &[Self::Frame]) -> Result<Self::Frame, SimError>;
    fn decode(&mut self, symbol: u64, encoded: &[Self::Frame]) -> Result<(), SimError>;
}

struct Engine<X: Executor> {
    sched: Schedule,
    exec: X,
    buffer: BufferState,
    trace: AccessTrace,
    stages: Vec<Vec<(TimeReductionSpec, Vec<X::Frame>)>>,
    queues: Vec<Vec<X::Frame>>,
    batches: Vec<u64>,
    outputs: Vec<X::Frame>,
}

impl<X: Executor> Engine<X> {
    fn new(spec: &ValidatedSpec, sched: &Schedule, exec: X) -> Self {
        let n = spec.encoder().len();
        let stages = (0..n).map(|i| spec.reductions_at(i).map(|r| (*r, Vec::new())).collect()).collect();
        Engine {
            sched: *sched,
            exec,
            buffer: BufferState::new(sched.buffer_bytes()),
            trace: AccessTrace::default(),
            stages,
            queues: vec![Vec::new(); n],
            batches: vec![0; n],
            outputs: Vec::new(),
        }
    }

    /// Feeds a frame into layer `i`'s reduction stages, then its queue.
    fn push(&mut self, i: usize, frame: X::Frame) -> Result<(), SimError> {
        if i == self.queues.len() {
            self.outputs.push(frame);
            return Ok(());
        }
        let mut frame = frame;
        for s in 0..self.stages[i].len() {
            let (r, pending) = &mut self.stages[i][s];
            pending.push(frame);
            if pending.len() < r.factor {
                return Ok(());
            }
            let r = *r;
            let group = core::mem::take(pending);
            frame = self.exec.reduce(&r, &group)?;
        }
        self.queues[i].push(frame);
        if self.queues[i].len() as u64 == self.sched.batch() {
            self.run_batch(i)?;
        }
        Ok(())
    }

    fn run_batch(&mut self, i: usize) -> Result<(), SimError> {
        let frames = core::mem::take(&mut self.queues[i]);
        let steps = frames.len() as u64;
        let batch = self.batches[i];
        self.batches[i] += 1;
        let bpp = self.sched.bytes_per_param();
        let blocks = layer_blocks(&self.exec.layer_blocks(i));
        let recurrent: u64 = blocks.iter().filter(|(k, _)| k.is_recurrent()).map(|&(_, n)| n as u64 * bpp).sum();
        let pinned = recurrent <= self.buffer.capacity();

        for &(kind, n) in &blocks {
            let id = BlockId::new(Site::Encoder(i), kind);
            let bytes = n as u64 * bpp;
            if !kind.is_recurrent() {
                self.trace.record(batch, id, 1, bytes, false);
            } else if pinned {
                self.buffer.load(id, bytes)?;
                self.trace.record(batch, id, 1, bytes, true);
            } else {
                self.trace.record(batch, id, steps, bytes, false);
            }
        }
        let mut out = Vec::with_capacity(frames.len());
        for f in frames {
            out.push(self.exec.layer_step(i, f)?);
        }
        self.trace.peak_resident = self.trace.peak_resident.max(self.buffer.peak());
        self.buffer.evict_all();
        for f in out {
            self.push(i + 1, f)?;
        }
        Ok(())
    }

    /// Drains partial reduction groups and partial batches, layer by layer.
    fn flush(&mut self) -> Result<(), SimError> {
        for i in 0..self.queues.len() {
            for s in 0..self.stages[i].len() {
                let (r, pending) = &mut self.stages[i][s];
                if pending.is_empty() {
                    continue;
                }
                let r = *r;
                let group = core::mem::take(pending);
                let mut frame = self.exec.reduce(&r, &group)?;
                // Later stages at the same position take the tail frame as input.
                let mut absorbed = false;
                for (r2, p2) in self.stages[i][s + 1..].iter_mut() {
                    p2.push(frame.clone());
                    if p2.len() < r2.factor {
                        absorbed = true;
                        break;
                    }
                    let r2 = *r2;
                    let g = core::mem::take(p2);
                    frame = self.exec.reduce(&r2, &g)?;
                }
                if !absorbed {
                    self.queues[i].push(frame);
                }
            }
            if !self.queues[i].is_empty() {
                self.run_batch(i)?;
            }
        }
        Ok(())
    }

    fn decode(&mut self, symbols: u64) -> Result<(), SimError> {
        let bpp = self.sched.bytes_per_param();
        let blocks = self.exec.decoder_blocks();
        let total: u64 = blocks.iter().map(|&(_, n)| n as u64 * bpp).sum();
        let resident = total <= self.buffer.capacity();
        let group = if resident { self.sched.decoder_reuse() } else { 1 };
        let mut s = 0;
        let mut batch = 0;
        while s < symbols {
            let n = group.min(symbols - s);
            for &(id, p) in &blocks {
                let bytes = p as u64 * bpp;
                if resident {
                    self.buffer.load(id, bytes)?;
                }
                self.trace.record(batch, id, 1, bytes, resident);
            }
            for k in s..s + n {
                self.exec.decode(k, &self.outputs)?;
            }
            self.trace.peak_resident = self.trace.peak_resident.max(self.buffer.peak());
            self.buffer.evict_all();
            s += n;
            batch += 1;
        }
        Ok(())
    }
}

fn run<X: Executor>(
    spec: &ValidatedSpec,
    sched: &Schedule,
    exec: X,
    inputs: impl IntoIterator<Item = X::Frame>,
    symbols: u64,
) -> Result<(Vec<X::Frame>, AccessTrace, X), SimError> {
    let mut engine = Engine::new(spec, sched, exec);
    for f in inputs {
        engine.push(0, f)?;
    }
    engine.flush()?;
    engine.decode(symbols)?;
    Ok((engine.outputs, engine.trace, engine.exec))
}

struct Numeric<'a> {
    spec: &'a ValidatedSpec,
    weights: &'a ModelWeights,
    states: Vec<CellState>,
    decoder: DecoderState,
    encoder_macs: u64,
    decoder_macs: u64,
}

impl Executor for Numeric<'_> {
    type Frame = Vector;

    fn layer_blocks(&self, layer: usize) -> ParamBlocks {
        self.weights.encoder[layer].param_blocks()
    }

    fn decoder_blocks(&self) -> Vec<(BlockId, usize)> {
        let d = &self.weights.decoder;
        let mut out = vec![(BlockId::new(Site::Embedding, BlockKind::Table), d.embedding.len())];
        for (i, w) in d.prediction.iter().enumerate() {
            for (kind, n) in layer_blocks(&w.param_blocks()) {
                out.push((BlockId::new(Site::Prediction(i), kind), n));
            }
        }
        out.push((BlockId::new(Site::Joint, BlockKind::JointHidden), d.joint_hidden.len()));
        out.push((BlockId::new(Site::Joint, BlockKind::JointOutput), d.joint_output.len()));
        out.push((BlockId::new(Site::Joint, BlockKind::Bias), d.joint_bias.len()));
        out
    }

    fn layer_step(&mut self, layer: usize, x: Vector) -> Result<Vector, SimError> {
        let spec = &self.spec.encoder()[layer];
        let w: &CellWeights = &self.weights.encoder[layer];
        Ok(run_layer_step(spec, w, &mut self.states[layer], &x, &mut self.encoder_macs)?)
    }

    fn reduce(&mut self, r: &TimeReductionSpec, group: &[Vector]) -> Result<Vector, SimError> {
        Ok(reduce_group(group, r.factor, r.mode)?)
    }

    fn decode(&mut self, symbol: u64, encoded: &[Vector]) -> Result<(), SimError> {
        let token = (symbol % self.spec.vocab() as u64) as usize;
        let zeros;
        let enc: &[f64] = match encoded.len() {
            0 => {
                zeros = Vector::zeros(self.spec.encoder_output_dim());
                &zeros
            }
            n => &encoded[(symbol % n as u64) as usize],
        };
        decode_symbol(self.spec, &self.weights.decoder, &mut self.decoder, token, enc, &mut self.decoder_macs)?;
        Ok(())
    }
}

struct Counting<'a> {
    spec: &'a ValidatedSpec,
    steps: Vec<u64>,
    per_symbol: u64,
    encoder_macs: u64,
    decoder_macs: u64,
}

impl Executor for Counting<'_> {
    type Frame = ();

    fn layer_blocks(&self, layer: usize) -> ParamBlocks {
        layer_param_count(&self.spec.encoder()[layer])
    }

    fn decoder_blocks(&self) -> Vec<(BlockId, usize)> {
        decoder_blocks(self.spec)
    }

    fn layer_step(&mut self, layer: usize, _: ()) -> Result<(), SimError> {
        self.encoder_macs += self.steps[layer];
        Ok(())
    }

    fn reduce(&mut self, _: &TimeReductionSpec, _: &[()]) -> Result<(), SimError> {
        Ok(())
    }

    fn decode(&mut self, _: u64, _: &[()]) -> Result<(), SimError> {
        self.decoder_macs += self.per_symbol;
        Ok(())
    }
}

/// Encoder outputs and decoder activity of a numeric simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub encoded: Vec<Vector>,
}

/// Runs the schedule over the real cells; `symbols` dummy tokens are decoded after the encoder.
pub fn simulate(
    spec: &ValidatedSpec,
    weights: &ModelWeights,
    sched: &Schedule,
    frames: &[Vector],
    symbols: u64,
) -> Result<(SimOutput, AccessTrace), SimError> {
    weights.check(spec).map_err(SimError::WeightShapeMismatch)?;
    if let Some(bad) = frames.iter().find(|f| f.len() != spec.feature_dim()) {
        return Err(SimError::Numeric(CellError::LengthMismatch { expected: spec.feature_dim(), found: bad.len() }));
    }
    let exec = Numeric {
        spec,
        weights,
        states: spec.encoder().iter().map(CellState::for_layer).collect(),
        decoder: DecoderState::new(spec),
        encoder_macs: 0,
        decoder_macs: 0,
    };
    let (encoded, mut trace, exec) = run(spec, sched, exec, frames.iter().cloned(), symbols)?;
    trace.encoder_macs = exec.encoder_macs;
    trace.decoder_macs = exec.decoder_macs;
    Ok((SimOutput { encoded }, trace))
}

/// Replays the schedule for `frames` input frames without running any arithmetic.
pub fn simulate_counts(spec: &ValidatedSpec, sched: &Schedule, frames: u64, symbols: u64) -> AccessTrace {
    let cc = crate::costmodel::compute_count(spec);
    let exec = Counting {
        spec,
        steps: cc.encoder_layer_step.clone(),
        per_symbol: cc.per_symbol(),
        encoder_macs: 0,
        decoder_macs: 0,
    };
    let (_, mut trace, exec) =
        run(spec, sched, exec, (0..frames).map(|_| ()), symbols).expect("count-only replay cannot fail");
    trace.encoder_macs = exec.encoder_macs;
    trace.decoder_macs = exec.decoder_macs;
    trace
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Verdict {
    Pass,
    PartialBatch,
    Fail,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::PartialBatch => "PARTIAL_BATCH",
            Verdict::Fail => "FAIL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BlockDiff {
    pub block: BlockId,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_exact"))]
    pub expected: Exact,
    pub traced: u64,
    /// Largest gap a trailing partial batch can explain.
    pub bound: u64,
    pub within_bound: bool,
}

impl BlockDiff {
    /// `traced - expected`.
    pub fn diff_f64(&self) -> f64 {
        self.traced as f64 - crate::costmodel::to_f64(&self.expected)
    }

    pub fn is_exact(&self) -> bool {
        self.expected == Exact::from_integer(self.traced as u128)
    }
}

#[cfg(feature = "serde")]
fn ser_exact<S: serde::Serializer>(x: &Exact, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(crate::costmodel::to_f64(x))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Reconciliation {
    pub verdict: Verdict,
    /// Whether `T` and `S` are whole multiples of the batch geometry.
    pub aligned: bool,
    pub blocks: Vec<BlockDiff>,
}

impl Reconciliation {
    /// Blocks whose traced bytes do not match the analytical figure exactly.
    pub fn mismatched(&self) -> impl Iterator<Item = &BlockDiff> {
        self.blocks.iter().filter(|d| !d.is_exact())
    }

    pub fn offending(&self) -> impl Iterator<Item = &BlockDiff> {
        self.blocks.iter().filter(|d| !d.within_bound || (self.aligned && !d.is_exact()))
    }
}

/// Compares analytical bytes (per frame / symbol, scaled by `T` / `S`) with traced bytes per block.
pub fn reconcile(spec: &ValidatedSpec, report: &CostReport, trace: &AccessTrace) -> Reconciliation {
    let sched = report.schedule;
    let t = report.frames;
    let s = report.symbols;
    let aligned = t.is_multiple_of(sched.batch() * spec.total_reduction()) && s.is_multiple_of(sched.decoder_reuse());
    let expected = report.expected_bytes();
    let bounds: BTreeMap<BlockId, u64> = report.blocks().map(|b: &BlockCost| (b.id, b.batch_bytes())).collect();

    let mut ids: Vec<BlockId> = expected.keys().copied().collect();
    for id in trace.per_block.keys() {
        if !expected.contains_key(id) {
            ids.push(*id);
        }
    }
    ids.sort();

    let blocks: Vec<BlockDiff> = ids
        .into_iter()
        .map(|id| {
            let exp = expected.get(&id).copied().unwrap_or_else(|| Exact::from_integer(0));
            let traced = trace.per_block.get(&id).copied().unwrap_or(0);
            let bound = bounds.get(&id).copied().unwrap_or(0);
            let got = Exact::from_integer(traced as u128);
            let gap = if got > exp { got - exp } else { exp - got };
            BlockDiff { block: id, expected: exp, traced, bound, within_bound: gap <= Exact::from_integer(bound as u128) }
        })
        .collect();

    let exact = blocks.iter().all(BlockDiff::is_exact);
    let bounded = blocks.iter().all(|d| d.within_bound);
    let verdict = if exact {
        Verdict::Pass
    } else if !aligned && bounded {
        Verdict::PartialBatch
    } else {
        Verdict::Fail
    };
    Reconciliation { verdict, aligned, blocks }
}
