//! Coreset selection: consensus embeddings, spherical k-means, anchor
//! extraction, and the random / binary-correctness baselines.

mod consensus;
mod kmeans;
mod select;

pub use consensus::{consensus_embeddings, ConsensusEmbeddings};
pub use kmeans::{
    distinct_rows, kmeans, lloyd, spherical_kmeans, Clustering, Geometry, DEFAULT_RESTARTS,
    MAX_ITERATIONS,
};
pub use select::{select_anchors, select_binary_kmeans, select_random, Coreset, SelectionMethod};
