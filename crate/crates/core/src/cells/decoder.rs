use alloc::vec::Vec;

use super::{run_layer_step, CellError, CellState, DecoderWeights, Vector};
use crate::arch::ValidatedSpec;

/// Recurrent state of the prediction stack.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub prediction: Vec<CellState>,
}

impl DecoderState {
    pub fn new(spec: &ValidatedSpec) -> Self {
        DecoderState { prediction: spec.prediction().iter().map(CellState::for_layer).collect() }
    }
}

/// Embeds `token`, advances the prediction stack and returns the joint logits
/// against encoder output `enc`.
pub fn decode_symbol(
    spec: &ValidatedSpec,
    w: &DecoderWeights,
    state: &mut DecoderState,
    token: usize,
    enc: &[f64],
    macs: &mut u64,
) -> Result<Vector, CellError> {
    if token >= spec.vocab() {
        return Err(CellError::LengthMismatch { expected: spec.vocab(), found: token });
    }
    if enc.len() != spec.encoder_output_dim() {
        return Err(CellError::LengthMismatch { expected: spec.encoder_output_dim(), found: enc.len() });
    }
    if w.prediction.len() != spec.prediction().len() || state.prediction.len() != spec.prediction().len() {
        return Err(CellError::WeightCount { expected: spec.prediction().len(), found: w.prediction.len() });
    }
    let mut x: Vector = w.embedding.row(token).into();
    for ((layer, lw), s) in spec.prediction().iter().zip(&w.prediction).zip(&mut state.prediction) {
        x = run_layer_step(layer, lw, s, &x, macs)?;
    }
    let j = spec.joint_dim();
    if w.joint_bias.len() != j + spec.vocab() {
        return Err(CellError::ShapeMismatch {
            block: "joint_bias",
            expected: (j + spec.vocab(), 1),
            found: (w.joint_bias.len(), 1),
        });
    }
    let joined: Vec<f64> = enc.iter().chain(x.iter()).copied().collect();
    let mut z = w.joint_hidden.matvec(&joined, macs)?;
    for (v, b) in z.iter_mut().zip(&w.joint_bias[..j]) {
        *v = libm::tanh(*v + b);
    }
    let mut logits = w.joint_output.matvec(&z, macs)?;
    for (v, b) in logits.iter_mut().zip(&w.joint_bias[j..]) {
        *v += b;
    }
    Ok(logits)
}
