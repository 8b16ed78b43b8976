use alloc::vec::Vec;

use super::{layer_norm, CellError, CellWeights, LnParams, Matrix, Vector, DEFAULT_LN_EPS};
use crate::arch::{CellKind, LayerSpec};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Recurrent state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    /// Flat hidden state, length `H*V`.
    pub h: Vector,
    /// Cell memory, `H x V`.
    pub c: Matrix,
}

impl CellState {
    pub fn zeros(hidden: usize, vec: usize) -> Self {
        CellState { h: Vector::zeros(hidden * vec), c: Matrix::zeros(hidden, vec) }
    }

    pub fn for_layer(layer: &LayerSpec) -> Self {
        CellState::zeros(layer.hidden, layer.vec)
    }

    pub fn hidden(&self) -> usize {
        self.c.rows()
    }

    pub fn vec(&self) -> usize {
        self.c.cols()
    }
}

fn ln_opt(x: Vector, p: &Option<LnParams>) -> Result<Vector, CellError> {
    match p {
        Some(p) => layer_norm(&x, &p.gain, &p.bias, DEFAULT_LN_EPS),
        None => Ok(x),
    }
}

fn expect_shape(block: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<(), CellError> {
    if m.shape() != (rows, cols) {
        return Err(CellError::ShapeMismatch { block, expected: (rows, cols), found: m.shape() });
    }
    Ok(())
}

/// Gate activations of one gated step (all length `H`).
#[derive(Debug, Clone, PartialEq)]
pub struct GateValues {
    pub forget: Vector,
    pub input: Vector,
    pub output: Vector,
    /// Raw candidate pre-activation `cp`, before `W_ch` / LayerNorm / tanh.
    pub candidate: Vector,
}

/// Computes the gates of an LSTM / CIFG-family step.
pub fn gate_values(w: &CellWeights, s: &CellState, x: &[f64]) -> Result<GateValues, CellError> {
    gates(w, s, x, &mut 0)
}

fn gates(w: &CellWeights, s: &CellState, x: &[f64], macs: &mut u64) -> Result<GateValues, CellError> {
    let h = s.hidden();
    let hv = h * s.vec();
    if s.h.len() != hv {
        return Err(CellError::LengthMismatch { expected: hv, found: s.h.len() });
    }
    if !x.iter().all(|v| v.is_finite()) || !s.h.is_finite() || !s.c.is_finite() {
        return Err(CellError::NonFiniteInput);
    }
    let rows = w.w_ih.rows();
    if h == 0 || !rows.is_multiple_of(h) || !(rows / h == 3 || rows / h == 4) {
        return Err(CellError::ShapeMismatch { block: "W_ih", expected: (4 * h, x.len()), found: w.w_ih.shape() });
    }
    let g = rows / h;
    expect_shape("W_ih", &w.w_ih, g * h, x.len())?;
    let w_hh = w.w_hh.as_ref().ok_or(CellError::ShapeMismatch {
        block: "W_hh",
        expected: (g * h, hv),
        found: (0, 0),
    })?;
    expect_shape("W_hh", w_hh, g * h, hv)?;
    if w.bias.len() != g * h {
        return Err(CellError::ShapeMismatch { block: "bias", expected: (g * h, 1), found: (w.bias.len(), 1) });
    }

    let mut pre = w.w_ih.matvec(x, macs)?;
    w_hh.matvec_acc(&s.h, &mut pre, macs)?;
    for (p, b) in pre.iter_mut().zip(w.bias.iter()) {
        *p += b;
    }
    let pre = ln_opt(pre, &w.ln_gates)?;

    let block = |k: usize| &pre[k * h..(k + 1) * h];
    let forget: Vector = block(0).iter().map(|&v| sigmoid(v)).collect();
    let (input, candidate, output): (Vector, Vector, Vector) = if g == 4 {
        (
            block(1).iter().map(|&v| sigmoid(v)).collect(),
            block(2).into(),
            block(3).iter().map(|&v| sigmoid(v)).collect(),
        )
    } else {
        (
            forget.iter().map(|f| 1.0 - f).collect(),
            block(1).into(),
            block(2).iter().map(|&v| sigmoid(v)).collect(),
        )
    };
    Ok(GateValues { forget, input, output, candidate })
}

/// Shared body of every LSTM / CIFG-family step. Which LayerNorm instances
/// run is decided by which parameters `w` carries.
fn gated(w: &CellWeights, s: &CellState, x: &[f64], macs: &mut u64) -> Result<(Vector, CellState), CellError> {
    let h = s.hidden();
    let v = s.vec();
    let hv = h * v;
    let gv = gates(w, s, x, macs)?;

    let cand = match &w.w_ch {
        Some(m) => {
            expect_shape("W_ch", m, hv, h)?;
            m.matvec(&gv.candidate, macs)?
        }
        None if v == 1 => gv.candidate,
        None => return Err(CellError::MissingWch),
    };
    let cand = ln_opt(cand, &w.ln_candidate)?;

    let c_prev = s.c.to_col_major();
    let mut c_new: Vector = (0..hv)
        .map(|k| gv.forget[k % h] * c_prev[k] + gv.input[k % h] * libm::tanh(cand[k]))
        .collect();
    c_new = ln_opt(c_new, &w.ln_cell)?;
    let h_new: Vector = (0..hv).map(|k| gv.output[k % h] * libm::tanh(c_new[k])).collect();
    let c = Matrix::from_col_major(h, v, &c_new)?;
    Ok((h_new.clone(), CellState { h: h_new, c }))
}

fn require_vector_cell(s: &CellState) -> Result<(), CellError> {
    if s.vec() != 1 {
        return Err(CellError::ShapeMismatch { block: "cell", expected: (s.hidden(), 1), found: s.c.shape() });
    }
    Ok(())
}

fn forbid(block: &'static str, present: bool) -> Result<(), CellError> {
    if present {
        return Err(CellError::ShapeMismatch { block, expected: (0, 0), found: (1, 1) });
    }
    Ok(())
}

/// LSTM step with LayerNorm over the stacked gate pre-activations and the cell update.
pub fn lstm_step_full_ln(w: &CellWeights, s: &CellState, x: &[f64]) -> Result<(Vector, CellState), CellError> {
    require_vector_cell(s)?;
    forbid("W_ch", w.w_ch.is_some())?;
    if w.ln_gates.is_none() {
        return Err(CellError::ShapeMismatch { block: "ln_gates", expected: (w.w_ih.rows(), 2), found: (0, 2) });
    }
    gated(w, s, x, &mut 0)
}

/// LSTM step normalising only the candidate and the cell update.
pub fn lstm_step_cell_ln(w: &CellWeights, s: &CellState, x: &[f64]) -> Result<(Vector, CellState), CellError> {
    require_vector_cell(s)?;
    forbid("W_ch", w.w_ch.is_some())?;
    forbid("ln_gates", w.ln_gates.is_some())?;
    gated(w, s, x, &mut 0)
}

/// Internally stacked step: the candidate is `tanh(ln(W_ch * cp))`.
pub fn is_step(w: &CellWeights, s: &CellState, x: &[f64]) -> Result<(Vector, CellState), CellError> {
    if w.w_ch.is_none() {
        return Err(CellError::MissingWch);
    }
    require_vector_cell(s)?;
    forbid("ln_gates", w.ln_gates.is_some())?;
    gated(w, s, x, &mut 0)
}

/// CIFG step with an `H x V` matrix cell memory.
pub fn cell2d_step(w: &CellWeights, s: &CellState, x: &[f64]) -> Result<(Vector, CellState), CellError> {
    if w.w_ch.is_none() {
        return Err(CellError::MissingWch);
    }
    let h = s.hidden();
    if w.w_ih.rows() != 3 * h {
        return Err(CellError::ShapeMismatch { block: "W_ih", expected: (3 * h, x.len()), found: w.w_ih.shape() });
    }
    forbid("ln_gates", w.ln_gates.is_some())?;
    gated(w, s, x, &mut 0)
}

fn sru(w: &CellWeights, s: &CellState, x: &[f64], macs: &mut u64) -> Result<(Vector, CellState), CellError> {
    let h = s.h.len();
    require_vector_cell(s)?;
    if s.hidden() != h {
        return Err(CellError::ShapeMismatch { block: "cell", expected: (h, 1), found: s.c.shape() });
    }
    if x.len() != h {
        return Err(CellError::ShapeMismatch { block: "x", expected: (h, 1), found: (x.len(), 1) });
    }
    if !x.iter().all(|v| v.is_finite()) || !s.c.is_finite() {
        return Err(CellError::NonFiniteInput);
    }
    forbid("W_hh", w.w_hh.is_some())?;
    expect_shape("W_ih", &w.w_ih, 3 * h, h)?;
    if w.bias.len() != 2 * h {
        return Err(CellError::ShapeMismatch { block: "bias", expected: (2 * h, 1), found: (w.bias.len(), 1) });
    }
    let proj = w.w_ih.matvec(x, macs)?;
    let c_prev = s.c.as_slice();
    let mut forget = Vec::with_capacity(h);
    let c_new: Vector = (0..h)
        .map(|k| {
            let f = sigmoid(proj[h + k] + w.bias[k]);
            forget.push(f);
            f * c_prev[k] + (1.0 - f) * proj[k]
        })
        .collect();
    let c_new = ln_opt(c_new, &w.ln_cell)?;
    let h_new: Vector = (0..h)
        .map(|k| {
            let r = sigmoid(proj[2 * h + k] + w.bias[h + k]);
            r * libm::tanh(c_new[k]) + (1.0 - r) * x[k]
        })
        .collect();
    let c = Matrix::from_col_major(h, 1, &c_new)?;
    Ok((h_new.clone(), CellState { h: h_new, c }))
}

/// Simple recurrent unit in highway form; input and hidden widths are equal.
pub fn sru_step(w: &CellWeights, s: &CellState, x: &[f64]) -> Result<(Vector, CellState), CellError> {
    sru(w, s, x, &mut 0)
}

/// One step of `layer`, counting the multiply-accumulates performed.
///
/// Returns the cell's hidden output (before any residual addition) and the new state.
pub fn step_layer(
    layer: &LayerSpec,
    w: &CellWeights,
    s: &CellState,
    x: &[f64],
    macs: &mut u64,
) -> Result<(Vector, CellState), CellError> {
    match layer.kind {
        CellKind::Sru => sru(w, s, x, macs),
        _ => gated(w, s, x, macs),
    }
}
