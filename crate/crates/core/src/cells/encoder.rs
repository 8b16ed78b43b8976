use alloc::vec::Vec;

use super::{step_layer, time_reduce, CellError, CellState, CellWeights, Vector};
use crate::arch::{LayerSpec, ValidatedSpec};

/// Checks one encoder layer's weights; a wrong `W_ih` width is reported as a
/// dimension mismatch against the chain.
pub fn check_layer_weights(index: usize, layer: &LayerSpec, w: &CellWeights) -> Result<(), CellError> {
    if w.w_ih.cols() != layer.input_dim {
        return Err(CellError::DimensionMismatch { layer: index, expected: layer.input_dim, found: w.w_ih.cols() });
    }
    w.check(layer)
}

pub(crate) fn check_encoder_weights(spec: &ValidatedSpec, weights: &[CellWeights]) -> Result<(), CellError> {
    if weights.len() != spec.encoder().len() {
        return Err(CellError::WeightCount { expected: spec.encoder().len(), found: weights.len() });
    }
    for (i, (layer, w)) in spec.encoder().iter().zip(weights).enumerate() {
        check_layer_weights(i, layer, w)?;
    }
    Ok(())
}

/// Steps one layer and applies its residual connection.
pub fn run_layer_step(
    layer: &LayerSpec,
    w: &CellWeights,
    state: &mut CellState,
    x: &[f64],
    macs: &mut u64,
) -> Result<Vector, CellError> {
    let (mut h, next) = step_layer(layer, w, state, x, macs)?;
    *state = next;
    if layer.residual {
        for (o, i) in h.iter_mut().zip(x) {
            *o += i;
        }
    }
    Ok(h)
}

/// Runs `frames` through every reduction and layer of the encoder in order.
pub fn encoder_forward(spec: &ValidatedSpec, weights: &[CellWeights], frames: &[Vector]) -> Result<Vec<Vector>, CellError> {
    if frames.is_empty() {
        return Err(CellError::EmptyInput);
    }
    check_encoder_weights(spec, weights)?;
    if let Some(bad) = frames.iter().find(|f| f.len() != spec.feature_dim()) {
        return Err(CellError::LengthMismatch { expected: spec.feature_dim(), found: bad.len() });
    }
    let mut seq: Vec<Vector> = frames.to_vec();
    let mut macs = 0;
    for (i, (layer, w)) in spec.encoder().iter().zip(weights).enumerate() {
        for r in spec.reductions_at(i) {
            seq = time_reduce(&seq, r.factor, r.mode)?;
        }
        let mut state = CellState::for_layer(layer);
        seq = seq
            .iter()
            .map(|x| run_layer_step(layer, w, &mut state, x, &mut macs))
            .collect::<Result<_, _>>()?;
    }
    Ok(seq)
}
