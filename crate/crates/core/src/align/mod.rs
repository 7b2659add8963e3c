//! Cross-model alignment: per-model projections into a shared MLP bottleneck,
//! supervised by cross-entropy on item correctness.

mod auc;
mod embed;
mod io;
mod network;
mod train;

pub use auc::auc;
pub use embed::{forward_embed, AlignedEmbeddings};
pub use network::{init_network, AlignmentNetwork, Example, InputNorm, Linear};
pub use train::{train_alignment, TrainConfig, TrainReport};

/// Width of the aligned embedding.
pub const EMBED_DIM: usize = 32;
