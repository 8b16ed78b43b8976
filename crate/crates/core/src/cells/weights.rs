//! Weight containers and the seeded random generator used for fixtures.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CellError, Matrix, Vector};
use crate::arch::{CellKind, LayerSpec, ValidatedSpec};

type Shape = Option<(usize, usize)>;

/// Gain and bias of one LayerNorm instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LnParams {
    pub gain: Vector,
    pub bias: Vector,
}

impl LnParams {
    /// Unit gain, zero bias.
    pub fn identity(len: usize) -> Self {
        LnParams { gain: Vector::filled(len, 1.0), bias: Vector::zeros(len) }
    }

    pub fn len(&self) -> usize {
        self.gain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gain.is_empty()
    }
}

/// Dense weights of one recurrent layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWeights {
    /// `G*H x d_in`
    pub w_ih: Matrix,
    /// `G*H x H*V`; absent for SRU.
    pub w_hh: Option<Matrix>,
    /// `H*V x H`
    pub w_ch: Option<Matrix>,
    pub bias: Vector,
    pub ln_gates: Option<LnParams>,
    pub ln_candidate: Option<LnParams>,
    pub ln_cell: Option<LnParams>,
}

impl CellWeights {
    pub fn zeros(layer: &LayerSpec) -> Self {
        Self::build(layer, |_, _| 0.0)
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; LayerNorm at unit gain, zero bias.
    pub fn random<R: Rng>(layer: &LayerSpec, rng: &mut R) -> Self {
        Self::build(layer, |fan_in, _| {
            let scale = 1.0 / libm::sqrt(fan_in as f64);
            rng.gen_range(-scale..=scale)
        })
    }

    fn build(layer: &LayerSpec, mut draw: impl FnMut(usize, usize) -> f64) -> Self {
        let h = layer.hidden;
        let hv = layer.output_dim();
        let g = layer.kind.gate_count();
        let mut matrix = |rows: usize, cols: usize| {
            let data = (0..rows * cols).map(|i| draw(cols, i)).collect();
            Matrix::from_row_major(rows, cols, data).expect("sized buffer")
        };
        let w_ih = matrix(g * h, layer.input_dim);
        let (w_hh, bias_len) = if layer.kind == CellKind::Sru {
            (None, 2 * h)
        } else {
            (Some(matrix(g * h, hv)), g * h)
        };
        let w_ch = layer.has_wch().then(|| matrix(hv, h));
        let bias: Vector = (0..bias_len).map(|i| draw(layer.input_dim.max(1), i)).collect();
        let ln = layer.ln_layout();
        CellWeights {
            w_ih,
            w_hh,
            w_ch,
            bias,
            ln_gates: ln.gates.map(LnParams::identity),
            ln_candidate: ln.candidate.map(LnParams::identity),
            ln_cell: ln.cell.map(LnParams::identity),
        }
    }

    /// Checks every block against the shapes `layer` implies.
    pub fn check(&self, layer: &LayerSpec) -> Result<(), CellError> {
        let expected = CellWeights::zeros(layer);
        let pairs: [(&'static str, Shape, Shape); 3] = [
            ("W_ih", Some(expected.w_ih.shape()), Some(self.w_ih.shape())),
            ("W_hh", expected.w_hh.as_ref().map(Matrix::shape), self.w_hh.as_ref().map(Matrix::shape)),
            ("W_ch", expected.w_ch.as_ref().map(Matrix::shape), self.w_ch.as_ref().map(Matrix::shape)),
        ];
        for (block, want, got) in pairs {
            if want != got {
                return Err(CellError::ShapeMismatch {
                    block,
                    expected: want.unwrap_or((0, 0)),
                    found: got.unwrap_or((0, 0)),
                });
            }
        }
        if self.bias.len() != expected.bias.len() {
            return Err(CellError::ShapeMismatch {
                block: "bias",
                expected: (expected.bias.len(), 1),
                found: (self.bias.len(), 1),
            });
        }
        let ln = [
            ("ln_gates", &expected.ln_gates, &self.ln_gates),
            ("ln_candidate", &expected.ln_candidate, &self.ln_candidate),
            ("ln_cell", &expected.ln_cell, &self.ln_cell),
        ];
        for (block, want, got) in ln {
            let want = want.as_ref().map_or(0, LnParams::len);
            let (g, b) = got.as_ref().map_or((0, 0), |p| (p.gain.len(), p.bias.len()));
            if g != want || b != want {
                return Err(CellError::ShapeMismatch { block, expected: (want, 2), found: (g, 2) });
            }
        }
        Ok(())
    }

    /// Parameter count per block, taken from the actual buffers.
    pub fn param_blocks(&self) -> crate::arch::ParamBlocks {
        let ln = |p: &Option<LnParams>| p.as_ref().map_or(0, |p| p.gain.len() + p.bias.len());
        crate::arch::ParamBlocks {
            w_ih: self.w_ih.len(),
            w_hh: self.w_hh.as_ref().map_or(0, Matrix::len),
            w_ch: self.w_ch.as_ref().map_or(0, Matrix::len),
            bias: self.bias.len(),
            layernorm: ln(&self.ln_gates) + ln(&self.ln_candidate) + ln(&self.ln_cell),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w_ih.is_finite()
            && self.w_hh.as_ref().is_none_or(Matrix::is_finite)
            && self.w_ch.as_ref().is_none_or(Matrix::is_finite)
            && self.bias.is_finite()
    }
}

/// Embedding table, prediction stack and joint network.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights {
    /// `vocab x embed_dim`
    pub embedding: Matrix,
    pub prediction: Vec<CellWeights>,
    /// `joint_dim x (enc_out + pred_out)`
    pub joint_hidden: Matrix,
    /// `vocab x joint_dim`
    pub joint_output: Matrix,
    /// `joint_dim` hidden bias followed by `vocab` output bias.
    pub joint_bias: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub encoder: Vec<CellWeights>,
    pub decoder: DecoderWeights,
}

impl ModelWeights {
    /// Deterministic random weights for `spec`.
    pub fn seeded(spec: &ValidatedSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = spec.encoder().iter().map(|l| CellWeights::random(l, &mut rng)).collect();
        let prediction = spec.prediction().iter().map(|l| CellWeights::random(l, &mut rng)).collect();
        let mut matrix = |rows: usize, cols: usize| {
            let scale = 1.0 / libm::sqrt(cols as f64);
            let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
            Matrix::from_row_major(rows, cols, data).expect("sized buffer")
        };
        let joint_in = spec.encoder_output_dim() + spec.prediction_output_dim();
        let embedding = matrix(spec.vocab(), spec.embed_dim());
        let joint_hidden = matrix(spec.joint_dim(), joint_in);
        let joint_output = matrix(spec.vocab(), spec.joint_dim());
        ModelWeights {
            encoder,
            decoder: DecoderWeights {
                embedding,
                prediction,
                joint_hidden,
                joint_output,
                joint_bias: Vector::zeros(spec.joint_dim() + spec.vocab()),
            },
        }
    }

    pub fn zeros(spec: &ValidatedSpec) -> Self {
        let joint_in = spec.encoder_output_dim() + spec.prediction_output_dim();
        ModelWeights {
            encoder: spec.encoder().iter().map(CellWeights::zeros).collect(),
            decoder: DecoderWeights {
                embedding: Matrix::zeros(spec.vocab(), spec.embed_dim()),
                prediction: spec.prediction().iter().map(CellWeights::zeros).collect(),
                joint_hidden: Matrix::zeros(spec.joint_dim(), joint_in),
                joint_output: Matrix::zeros(spec.vocab(), spec.joint_dim()),
                joint_bias: Vector::zeros(spec.joint_dim() + spec.vocab()),
            },
        }
    }

    /// Checks every encoder, prediction and joint block against `spec`.
    pub fn check(&self, spec: &ValidatedSpec) -> Result<(), CellError> {
        super::encoder::check_encoder_weights(spec, &self.encoder)?;
        let d = &self.decoder;
        if d.prediction.len() != spec.prediction().len() {
            return Err(CellError::WeightCount { expected: spec.prediction().len(), found: d.prediction.len() });
        }
        for (w, layer) in d.prediction.iter().zip(spec.prediction()) {
            w.check(layer)?;
        }
        let joint_in = spec.encoder_output_dim() + spec.prediction_output_dim();
        for (block, want, got) in [
            ("embedding", (spec.vocab(), spec.embed_dim()), d.embedding.shape()),
            ("W_joint", (spec.joint_dim(), joint_in), d.joint_hidden.shape()),
            ("W_out", (spec.vocab(), spec.joint_dim()), d.joint_output.shape()),
            ("joint_bias", (spec.joint_dim() + spec.vocab(), 1), (d.joint_bias.len(), 1)),
        ] {
            if want != got {
                return Err(CellError::ShapeMismatch { block, expected: want, found: got });
            }
        }
        Ok(())
    }
}
