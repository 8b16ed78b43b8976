use super::{CellError, Vector};

pub const DEFAULT_LN_EPS: f64 = 1e-5;

/// `gain * (x - mean) / sqrt(var + eps) + bias`, population variance.
pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], eps: f64) -> Result<Vector, CellError> {
    if gain.len() != x.len() {
        return Err(CellError::LengthMismatch { expected: x.len(), found: gain.len() });
    }
    if bias.len() != x.len() {
        return Err(CellError::LengthMismatch { expected: x.len(), found: bias.len() });
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(CellError::InvalidEpsilon);
    }
    if x.is_empty() {
        return Err(CellError::EmptyInput);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let denom = var + eps;
    if denom == 0.0 {
        return Err(CellError::DegenerateInput);
    }
    let inv = 1.0 / libm::sqrt(denom);
    Ok(x.iter()
        .zip(gain)
        .zip(bias)
        .map(|((v, g), b)| g * (v - mean) * inv + b)
        .collect())
}
