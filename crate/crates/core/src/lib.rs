//! Memory-access cost modelling for streaming recurrent-transducer speech models.
//!
//! The crate is `no_std` (it needs `alloc`) and has no IO. It is organised as:
//!
//! * [`arch`]: model IR, validation and exact parameter / working-set accounting.
//! * [`cells`]: reference forward pass of every recurrent-cell variant.
//! * [`costmodel`]: closed-form off-chip bytes, MACs and energy for a model under a [`costmodel::Schedule`].
//! * [`memsim`]: an instrumented execution of the same schedule that counts every
//!   parameter byte fetched; the brute-force oracle for [`costmodel`].
//! * [`scheduler`]: design points and the off-chip-minimal schedule search.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod arch;
pub mod blocks;
pub mod cells;
pub mod costmodel;
pub mod memsim;
pub mod scheduler;

pub use arch::{
    validate_spec, CellKind, LayerDef, LayerNormMode, LayerSpec, ParamReport, ReductionMode,
    TimeReductionSpec, TransducerSpec, ValidatedSpec,
};
pub use costmodel::{cost_report, CostReport, EnergyModel, Schedule};
pub use memsim::{reconcile, simulate, simulate_counts, AccessTrace};
