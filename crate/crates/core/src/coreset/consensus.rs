use ndarray::{Array2, Axis};

use crate::align::AlignedEmbeddings;

/// Unit-norm mean embedding of each item over the source models.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusEmbeddings {
    /// `items × dim`, rows unit norm.
    pub vectors: Array2<f64>,
    /// Items whose mean vector vanished; their row is the first basis vector.
    pub degenerate: Vec<usize>,
}

const DEGENERATE_NORM: f64 = 1e-12;

impl ConsensusEmbeddings {
    /// Normalizes the rows of `vectors`; rows with norm ≤ 1e-12 are flagged.
    pub fn from_rows(mut vectors: Array2<f64>) -> Self {
        let mut degenerate = Vec::new();
        for (i, mut row) in vectors.rows_mut().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm <= DEGENERATE_NORM {
                row.fill(0.0);
                row[0] = 1.0;
                degenerate.push(i);
            } else {
                row /= norm;
            }
        }
        Self {
            vectors,
            degenerate,
        }
    }

    pub fn num_items(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

/// `ẽ_i = e_i / ‖e_i‖` with `e_i` the mean of `z_{m,i}` over models.
pub fn consensus_embeddings(z: &AlignedEmbeddings) -> ConsensusEmbeddings {
    let mean = z
        .values
        .mean_axis(Axis(0))
        .expect("at least one source model");
    ConsensusEmbeddings::from_rows(mean)
}
