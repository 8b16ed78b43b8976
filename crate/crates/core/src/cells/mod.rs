//! Reference numeric forward pass for every recurrent-cell variant.
//!
//! Gate blocks are stacked row-wise in `W_ih` / `W_hh` in the order
//! `[f, i, c, o]` for LSTM kinds and `[f, c, o]` for CIFG kinds (`i = 1 - f`).
//! SRU stacks `[candidate, forget, reset]` in `W_ih` and `[forget, reset]` in
//! the bias.
//!
//! A matrix cell state `C` (`H x V`) is exchanged with the flat hidden vector
//! in column-major order: element `(r, c)` is flat index `c * H + r`. Gates of
//! length `H` broadcast across the `V` columns.

use core::fmt;

mod decoder;
mod encoder;
mod linalg;
mod norm;
mod reduce;
mod step;
mod weights;

pub use decoder::{decode_symbol, DecoderState};
pub use encoder::{check_layer_weights, encoder_forward, run_layer_step};
pub use linalg::{Matrix, Vector};
pub use norm::{layer_norm, DEFAULT_LN_EPS};
pub use reduce::{reduce_group, time_reduce};
pub use step::{
    cell2d_step, gate_values, is_step, lstm_step_cell_ln, lstm_step_full_ln, sigmoid, sru_step, step_layer, CellState,
    GateValues,
};
pub use weights::{CellWeights, DecoderWeights, LnParams, ModelWeights};

#[derive(Debug, Clone, PartialEq)]
pub enum CellError {
    LengthMismatch { expected: usize, found: usize },
    /// Zero variance with `eps = 0`.
    DegenerateInput,
    InvalidEpsilon,
    ShapeMismatch { block: &'static str, expected: (usize, usize), found: (usize, usize) },
    NonFiniteInput,
    MissingWch,
    EmptyInput,
    InvalidFactor(usize),
    /// A layer's weights do not accept the width the model feeds it.
    DimensionMismatch { layer: usize, expected: usize, found: usize },
    WeightCount { expected: usize, found: usize },
}

impl fmt::Display for CellError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellError::LengthMismatch { expected, found } => {
                write!(f, "LENGTH_MISMATCH: expected length {expected}, found {found}")
            }
            CellError::DegenerateInput => f.write_str("DEGENERATE_INPUT: zero variance with eps = 0"),
            CellError::InvalidEpsilon => f.write_str("eps must be a finite non-negative number"),
            CellError::ShapeMismatch { block, expected, found } => write!(
                f,
                "SHAPE_MISMATCH: {block} expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            CellError::NonFiniteInput => f.write_str("NONFINITE_INPUT"),
            CellError::MissingWch => f.write_str("MISSING_WCH: internally stacked step needs W_ch"),
            CellError::EmptyInput => f.write_str("EMPTY_INPUT"),
            CellError::InvalidFactor(k) => write!(f, "reduction factor must be >= 2, got {k}"),
            CellError::DimensionMismatch { layer, expected, found } => write!(
                f,
                "DIMENSION_MISMATCH: encoder layer {layer} weights take width {found}, model feeds {expected}"
            ),
            CellError::WeightCount { expected, found } => {
                write!(f, "expected weights for {expected} layers, got {found}")
            }
        }
    }
}

impl core::error::Error for CellError {}
