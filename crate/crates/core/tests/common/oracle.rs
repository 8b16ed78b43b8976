//! Straight-line scalar re-implementations of the cell equations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rnnt_memcost::arch::LayerSpec;
use rnnt_memcost::cells::{CellState, CellWeights, LnParams, Matrix};

pub const TOL: f64 = 1e-12;
pub const EPS: f64 = 1e-5;

mod scalar {
    use super::EPS;

    pub fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..a.len() {
            s += a[k] * b[k];
        }
        s
    }

    pub fn ln(x: &[f64], g: &[f64], b: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let mut mean = 0.0;
        for v in x {
            mean += v;
        }
        mean /= n;
        let mut var = 0.0;
        for v in x {
            var += (v - mean) * (v - mean);
        }
        var /= n;
        let sd = (var + EPS).sqrt();
        (0..x.len()).map(|k| g[k] * (x[k] - mean) / sd + b[k]).collect()
    }
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn opt_ln(x: Vec<f64>, p: &Option<LnParams>) -> Vec<f64> {
    match p {
        Some(p) => scalar::ln(&x, &p.gain, &p.bias),
        None => x,
    }
}

/// Gated cell written directly from the equations, one scalar at a time.
pub fn gated_oracle(w: &CellWeights, h_prev: &[f64], c_prev: &Matrix, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let hh = c_prev.rows();
    let vv = c_prev.cols();
    let wih = rows(&w.w_ih);
    let whh = rows(w.w_hh.as_ref().unwrap());
    let g = wih.len() / hh;
    let mut pre: Vec<f64> = (0..g * hh).map(|k| scalar::dot(&wih[k], x) + scalar::dot(&whh[k], h_prev) + w.bias[k]).collect();
    pre = opt_ln(pre, &w.ln_gates);
    let f: Vec<f64> = (0..hh).map(|r| scalar::sig(pre[r])).collect();
    let (i, cp, o): (Vec<f64>, Vec<f64>, Vec<f64>) = if g == 4 {
        (
            (0..hh).map(|r| scalar::sig(pre[hh + r])).collect(),
            pre[2 * hh..3 * hh].to_vec(),
            (0..hh).map(|r| scalar::sig(pre[3 * hh + r])).collect(),
        )
    } else {
        (f.iter().map(|v| 1.0 - v).collect(), pre[hh..2 * hh].to_vec(), (0..hh).map(|r| scalar::sig(pre[2 * hh + r])).collect())
    };
    let cand = match &w.w_ch {
        Some(m) => rows(m).iter().map(|row| scalar::dot(row, &cp)).collect(),
        None => cp,
    };
    let cand = opt_ln(cand, &w.ln_candidate);
    // cell memory as an H x V grid; flat index of (r, c) is c*H + r
    let mut flat = vec![0.0; hh * vv];
    for c in 0..vv {
        for r in 0..hh {
            flat[c * hh + r] = f[r] * c_prev.get(r, c) + i[r] * cand[c * hh + r].tanh();
        }
    }
    let flat = opt_ln(flat, &w.ln_cell);
    let mut h = vec![0.0; hh * vv];
    let mut grid = vec![vec![0.0; vv]; hh];
    for c in 0..vv {
        for r in 0..hh {
            h[c * hh + r] = o[r] * flat[c * hh + r].tanh();
            grid[r][c] = flat[c * hh + r];
        }
    }
    (h, grid)
}

pub fn sru_oracle(w: &CellWeights, c_prev: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let m = rows(&w.w_ih);
    let mut c = Vec::with_capacity(n);
    for k in 0..n {
        let xt = scalar::dot(&m[k], x);
        let f = scalar::sig(scalar::dot(&m[n + k], x) + w.bias[k]);
        c.push(f * c_prev[k] + (1.0 - f) * xt);
    }
    let c = opt_ln(c, &w.ln_cell);
    let h = (0..n)
        .map(|k| {
            let r = scalar::sig(scalar::dot(&m[2 * n + k], x) + w.bias[n + k]);
            r * c[k].tanh() + (1.0 - r) * x[k]
        })
        .collect();
    (h, c)
}

pub fn randomize(layer: &LayerSpec, rng: &mut ChaCha8Rng) -> CellWeights {
    let mut w = CellWeights::random(layer, rng);
    for p in [&mut w.ln_gates, &mut w.ln_candidate, &mut w.ln_cell].into_iter().flatten() {
        for g in p.gain.iter_mut() {
            *g = rng.gen_range(0.5..1.5);
        }
        for b in p.bias.iter_mut() {
            *b = rng.gen_range(-0.2..0.2);
        }
    }
    w
}

pub fn random_state(layer: &LayerSpec, rng: &mut ChaCha8Rng) -> CellState {
    let mut s = CellState::for_layer(layer);
    for v in s.h.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    for v in s.c.as_mut_slice() {
        *v = rng.gen_range(-2.0..2.0);
    }
    s
}

pub fn random_x(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()
}
