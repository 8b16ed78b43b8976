//! System design points and the off-chip-minimal schedule search.
//!
//! Latency is measured in frames (10 ms each). A budget of 8 frames is the
//! low-latency point; 16 frames leaves 2x headroom on a 160 ms target.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::arch::{working_set, ValidatedSpec};
use crate::costmodel::{cost_report, CostReport, EnergyModel, Schedule, ScheduleError};

pub const IB_S: u64 = 8;
pub const IB_L: u64 = 32;
pub const WS_S: u64 = 500_000;
pub const WS_L: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPreset {
    pub name: &'static str,
    pub batch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetPreset {
    pub name: &'static str,
    pub params: u64,
}

pub const BATCH_PRESETS: [BatchPreset; 2] =
    [BatchPreset { name: "IB_s", batch: IB_S }, BatchPreset { name: "IB_l", batch: IB_L }];

pub const BUDGET_PRESETS: [BudgetPreset; 2] =
    [BudgetPreset { name: "WS_s", params: WS_S }, BudgetPreset { name: "WS_l", params: WS_L }];

/// A batch factor paired with a buffer budget counted in parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DesignPoint {
    pub name: String,
    pub batch: u64,
    pub budget_params: u64,
}

impl DesignPoint {
    pub fn new(name: impl Into<String>, batch: u64, budget_params: u64) -> Self {
        DesignPoint { name: name.into(), batch, budget_params }
    }

    pub fn schedule(&self, bytes_per_param: u64) -> Result<Schedule, ScheduleError> {
        Schedule::new(self.batch, self.budget_params.saturating_mul(bytes_per_param), bytes_per_param)
    }
}

/// The four batch x budget combinations.
pub fn presets() -> Vec<DesignPoint> {
    let mut out = Vec::new();
    for b in BATCH_PRESETS {
        for w in BUDGET_PRESETS {
            out.push(DesignPoint::new(format!("{}+{}", b.name, w.name), b.batch, w.params));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Pinnability {
    pub layer: usize,
    pub working_set: u64,
    pub pinned: bool,
}

/// Per encoder layer: does its recurrent block fit `budget_params` on its own?
pub fn pinnability(spec: &ValidatedSpec, budget_params: u64, bytes_per_param: u64) -> Vec<Pinnability> {
    let budget = budget_params.saturating_mul(bytes_per_param);
    spec.encoder()
        .iter()
        .enumerate()
        .map(|(layer, l)| {
            let ws = working_set(l, bytes_per_param);
            Pinnability { layer, working_set: ws, pinned: ws <= budget }
        })
        .collect()
}

/// Utterance the search evaluates reports against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workload {
    pub frames: u64,
    pub symbols: u64,
    pub energy: EnergyModel,
}

impl Default for Workload {
    fn default() -> Self {
        Workload { frames: 1000, symbols: 100, energy: EnergyModel::default() }
    }
}

/// Picks `B` in `1..=latency_budget_frames` with the fewest off-chip bytes,
/// preferring the smaller `B` on ties.
pub fn best_schedule(
    spec: &ValidatedSpec,
    latency_budget_frames: u64,
    budget_params: u64,
    bytes_per_param: u64,
    workload: &Workload,
) -> Result<(Schedule, CostReport), ScheduleError> {
    if latency_budget_frames == 0 {
        return Err(ScheduleError::ZeroBatch);
    }
    let mut best: Option<(Schedule, CostReport)> = None;
    for b in 1..=latency_budget_frames {
        let sched = DesignPoint::new("", b, budget_params).schedule(bytes_per_param)?;
        let report = cost_report(spec, &sched, workload.frames, workload.symbols, &workload.energy);
        let better = match &best {
            None => true,
            Some((_, r)) => {
                (report.encoder.bytes_per_frame + report.decoder.bytes_per_symbol)
                    < (r.encoder.bytes_per_frame + r.decoder.bytes_per_symbol)
            }
        };
        if better {
            best = Some((sched, report));
        }
    }
    Ok(best.expect("at least one candidate"))
}
