//! Random model family shared by the property and equivalence suites.
#![allow(dead_code)]

pub mod oracle;

use rand::seq::SliceRandom;
use rand::Rng;
use rnnt_memcost::arch::{
    CellKind, LayerDef, LayerNormMode, ReductionMode, TimeReductionSpec, TransducerSpec,
};

pub const WIDE: &[usize] = &[16, 32, 64, 128, 200, 256, 320, 480, 512, 640, 768, 1024];
pub const TINY: &[usize] = &[2, 3, 4, 5, 6];

pub struct Family<'a> {
    pub max_depth: usize,
    pub hidden: &'a [usize],
    pub max_vec: usize,
    /// SRU layers need `input_dim == hidden`; skip them above this width.
    pub max_sru: usize,
    pub embed: &'a [usize],
    pub vocab: std::ops::RangeInclusive<usize>,
}

pub const WIDE_FAMILY: Family<'static> = Family {
    max_depth: 12,
    hidden: WIDE,
    max_vec: 3,
    max_sru: 1024,
    embed: &[64, 128, 256],
    vocab: 32..=1024,
};

pub const TINY_FAMILY: Family<'static> = Family {
    max_depth: 4,
    hidden: TINY,
    max_vec: 3,
    max_sru: 12,
    embed: &[3, 4],
    vocab: 3..=7,
};

fn layernorm<R: Rng>(kind: CellKind, rng: &mut R) -> LayerNormMode {
    if kind == CellKind::Sru || kind.is_internally_stacked() {
        *[LayerNormMode::None, LayerNormMode::CellOnly].choose(rng).unwrap()
    } else {
        *[LayerNormMode::None, LayerNormMode::Full, LayerNormMode::CellOnly].choose(rng).unwrap()
    }
}

fn layer<R: Rng>(f: &Family, width: usize, kinds: &[CellKind], rng: &mut R) -> LayerDef {
    let mut kind = *kinds.choose(rng).unwrap();
    if kind == CellKind::Sru && width > f.max_sru {
        kind = CellKind::Lstm;
    }
    let hidden = if kind == CellKind::Sru { width } else { *f.hidden.choose(rng).unwrap() };
    let vec = if kind == CellKind::Stacked2dCifgResidual { rng.gen_range(1..=f.max_vec) } else { 1 };
    let residual = width == hidden * vec && rng.gen_bool(0.5);
    LayerDef::new(kind, hidden)
        .with_vec(vec)
        .with_layernorm(layernorm(kind, rng))
        .with_residual(residual)
}

/// A spec that always validates: every kind, 0-2 reductions of factor 2-4.
pub fn random_spec<R: Rng>(f: &Family, rng: &mut R) -> TransducerSpec {
    let depth = rng.gen_range(1..=f.max_depth);
    let reductions: Vec<TimeReductionSpec> = (0..rng.gen_range(0..=2))
        .map(|_| TimeReductionSpec {
            mode: *[ReductionMode::Concat, ReductionMode::Mean].choose(rng).unwrap(),
            factor: rng.gen_range(2..=4),
            position: rng.gen_range(0..depth),
        })
        .collect();
    let feature_dim = *f.hidden.choose(rng).unwrap();
    let mut width = feature_dim;
    let mut encoder = Vec::with_capacity(depth);
    for i in 0..depth {
        for r in reductions.iter().filter(|r| r.position == i) {
            if r.mode == ReductionMode::Concat {
                width *= r.factor;
            }
        }
        let def = layer(f, width, &CellKind::ALL, rng);
        width = def.hidden * def.vec;
        encoder.push(def);
    }
    let embed_dim = *f.embed.choose(rng).unwrap();
    let mut width = embed_dim;
    let prediction = (0..rng.gen_range(0..=2))
        .map(|_| {
            let def = layer(f, width, &[CellKind::Lstm, CellKind::CifgResidual, CellKind::Sru], rng);
            width = def.hidden * def.vec;
            def
        })
        .collect();
    TransducerSpec {
        feature_dim,
        encoder,
        reductions,
        prediction,
        embed_dim,
        joint_dim: *f.hidden.choose(rng).unwrap(),
        vocab: rng.gen_range(f.vocab.clone()),
    }
}
