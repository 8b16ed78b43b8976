//! Weight-block identifiers shared by the analytical model and the simulator.

use alloc::vec::Vec;
use core::fmt;

use crate::arch::{joint_param_count, layer_param_count, ParamBlocks, ValidatedSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Encoder(usize),
    Prediction(usize),
    Embedding,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockKind {
    InputWeights,
    RecurrentWeights,
    StackWeights,
    Bias,
    LayerNorm,
    Table,
    JointHidden,
    JointOutput,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::InputWeights => "W_ih",
            BlockKind::RecurrentWeights => "W_hh",
            BlockKind::StackWeights => "W_ch",
            BlockKind::Bias => "bias",
            BlockKind::LayerNorm => "layernorm",
            BlockKind::Table => "table",
            BlockKind::JointHidden => "W_joint",
            BlockKind::JointOutput => "W_out",
        }
    }

    /// Part of the sequential (non-batchable) path.
    pub fn is_recurrent(self) -> bool {
        matches!(self, BlockKind::RecurrentWeights | BlockKind::StackWeights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId {
    pub site: Site,
    pub kind: BlockKind,
}

impl BlockId {
    pub fn new(site: Site, kind: BlockKind) -> Self {
        BlockId { site, kind }
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.site {
            Site::Encoder(i) => write!(f, "encoder[{i}].{}", self.kind.name()),
            Site::Prediction(i) => write!(f, "prediction[{i}].{}", self.kind.name()),
            Site::Embedding => write!(f, "embedding.{}", self.kind.name()),
            Site::Joint => write!(f, "joint.{}", self.kind.name()),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for BlockId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Non-empty blocks of a recurrent layer with their parameter counts.
pub fn layer_blocks(p: &ParamBlocks) -> Vec<(BlockKind, usize)> {
    [
        (BlockKind::InputWeights, p.w_ih),
        (BlockKind::RecurrentWeights, p.w_hh),
        (BlockKind::StackWeights, p.w_ch),
        (BlockKind::Bias, p.bias),
        (BlockKind::LayerNorm, p.layernorm),
    ]
    .into_iter()
    .filter(|&(_, n)| n > 0)
    .collect()
}

/// Every decoder block (embedding, prediction layers, joint) with its parameter count.
pub fn decoder_blocks(spec: &ValidatedSpec) -> Vec<(BlockId, usize)> {
    let mut out = Vec::new();
    out.push((BlockId::new(Site::Embedding, BlockKind::Table), spec.vocab() * spec.embed_dim()));
    for (i, layer) in spec.prediction().iter().enumerate() {
        for (kind, n) in layer_blocks(&layer_param_count(layer)) {
            out.push((BlockId::new(Site::Prediction(i), kind), n));
        }
    }
    let joint = joint_param_count(spec);
    out.push((BlockId::new(Site::Joint, BlockKind::JointHidden), joint.hidden));
    out.push((BlockId::new(Site::Joint, BlockKind::JointOutput), joint.output));
    out.push((BlockId::new(Site::Joint, BlockKind::Bias), joint.bias));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn display_names() {
        assert_eq!(BlockId::new(Site::Encoder(3), BlockKind::RecurrentWeights).to_string(), "encoder[3].W_hh");
        assert_eq!(BlockId::new(Site::Joint, BlockKind::Bias).to_string(), "joint.bias");
        assert_eq!(BlockId::new(Site::Embedding, BlockKind::Table).to_string(), "embedding.table");
    }
}
