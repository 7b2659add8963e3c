use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::analysis::pca_decompose;
use crate::coreset::ConsensusEmbeddings;
use crate::dataio::ResponseMatrix;
use crate::error::{Error, Result};

/// Which per-item features the extrapolator regresses on.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Mean correctness over the source models (one scalar per item).
    #[default]
    MeanCorrectness,
    /// Projections onto the listed principal axes (1-based) of the consensus embeddings.
    PcSubspace(Vec<usize>),
    /// The full centered consensus embedding.
    FullEmbedding,
}

impl FeatureMode {
    pub fn needs_embeddings(&self) -> bool {
        !matches!(self, FeatureMode::MeanCorrectness)
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureMode::MeanCorrectness => f.write_str("mean"),
            FeatureMode::FullEmbedding => f.write_str("all"),
            FeatureMode::PcSubspace(ids) => {
                let ids: Vec<String> = ids.iter().map(usize::to_string).collect();
                write!(f, "pc:{}", ids.join(","))
            }
        }
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    /// `mean`, `all`, or `pc:1,2,3`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(FeatureMode::MeanCorrectness),
            "all" => Ok(FeatureMode::FullEmbedding),
            _ => {
                let list = s.strip_prefix("pc:").ok_or_else(|| {
                    Error::InvalidArgument(format!("unknown feature mode `{s}`"))
                })?;
                let ids = list
                    .split(',')
                    .map(|t| {
                        t.trim().parse::<usize>().map_err(|_| {
                            Error::InvalidArgument(format!("bad component id `{t}`"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(FeatureMode::PcSubspace(ids))
            }
        }
    }
}

/// A feature matrix (`items × d_f`) and the mode that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub mode: FeatureMode,
    pub values: Array2<f64>,
}

impl FeatureSpec {
    pub fn num_items(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// `x_i = (1/|S|) Σ_m y_{m,i}`.
pub fn mean_correctness_feature(source_responses: &ResponseMatrix) -> Result<FeatureSpec> {
    if source_responses.num_models() == 0 {
        return Err(Error::InvalidArgument("no source models".into()));
    }
    let mean = source_responses
        .values()
        .mapv(f64::from)
        .mean_axis(Axis(0))
        .expect("nonempty");
    Ok(FeatureSpec {
        mode: FeatureMode::MeanCorrectness,
        values: mean.insert_axis(Axis(1)),
    })
}

/// Principal-axis projections of the consensus embeddings; `None` selects the
/// full centered embedding.
pub fn pc_features(emb: &ConsensusEmbeddings, components: Option<&[usize]>) -> Result<FeatureSpec> {
    let data = &emb.vectors;
    match components {
        None => {
            let mean = data.mean_axis(Axis(0)).ok_or_else(|| {
                Error::InvalidArgument("no items".into())
            })?;
            Ok(FeatureSpec {
                mode: FeatureMode::FullEmbedding,
                values: data - &mean,
            })
        }
        Some(ids) => {
            let d = emb.dim();
            if ids.is_empty() || ids.iter().any(|&k| k == 0 || k > d) {
                return Err(Error::InvalidArgument(format!(
                    "component ids must lie in [1, {d}]"
                )));
            }
            let pca = pca_decompose(data.view())?;
            let cols: Vec<usize> = ids.iter().map(|k| k - 1).collect();
            Ok(FeatureSpec {
                mode: FeatureMode::PcSubspace(ids.to_vec()),
                values: pca.scores.select(Axis(1), &cols),
            })
        }
    }
}

/// Builds features for `mode` from source responses or consensus embeddings.
pub fn build_features(
    mode: &FeatureMode,
    source_responses: &ResponseMatrix,
    emb: Option<&ConsensusEmbeddings>,
) -> Result<FeatureSpec> {
    let need = || {
        emb.ok_or_else(|| Error::InvalidArgument(format!("feature mode `{mode}` needs embeddings")))
    };
    match mode {
        FeatureMode::MeanCorrectness => mean_correctness_feature(source_responses),
        FeatureMode::FullEmbedding => pc_features(need()?, None),
        FeatureMode::PcSubspace(ids) => pc_features(need()?, Some(ids)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn responses(rows: Vec<Vec<u8>>) -> ResponseMatrix {
        let m = rows.len();
        let n = rows[0].len();
        let names = (0..m).map(|k| format!("s{k}")).collect();
        ResponseMatrix::new(names, Array2::from_shape_vec((m, n), rows.concat()).unwrap()).unwrap()
    }

    #[test]
    fn mean_correctness_values() {
        let mut rows = vec![vec![1u8, 1]; 7];
        rows.extend(vec![vec![0u8, 1]; 3]);
        let f = mean_correctness_feature(&responses(rows)).unwrap();
        assert_eq!(f.dim(), 1);
        assert!((f.values[[0, 0]] - 0.7).abs() < 1e-15);
        assert_eq!(f.values[[1, 0]], 1.0);

        let single = mean_correctness_feature(&responses(vec![vec![0, 1, 1, 0]])).unwrap();
        assert_eq!(single.values.column(0).to_vec(), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn first_component_recovers_positions_on_a_line() {
        let dir = [0.6, 0.0, 0.8];
        let offsets = [-2.0, -0.5, 0.0, 1.0, 1.5];
        let base = [1.0, 2.0, 3.0];
        let rows = Array2::from_shape_fn((5, 3), |(i, k)| base[k] + offsets[i] * dir[k]);
        // bypass normalization so the data stay collinear
        let emb = ConsensusEmbeddings {
            vectors: rows,
            degenerate: vec![],
        };
        let f = pc_features(&emb, Some(&[1, 2])).unwrap();
        let mean_offset = offsets.iter().sum::<f64>() / 5.0;
        let sign = f.values[[4, 0]].signum();
        for i in 0..5 {
            assert!((f.values[[i, 0]] - sign * (offsets[i] - mean_offset)).abs() < 1e-9);
            assert!(f.values[[i, 1]].abs() < 1e-9);
        }
    }

    #[test]
    fn full_mode_keeps_embedding_width() {
        let rows = Array2::from_shape_fn((10, 32), |(i, k)| ((i * 7 + k * 3) % 11) as f64 + 0.5);
        let emb = ConsensusEmbeddings::from_rows(rows);
        let f = pc_features(&emb, None).unwrap();
        assert_eq!(f.dim(), 32);
        assert!(f.values.sum_axis(Axis(0)).iter().all(|v| v.abs() < 1e-12));
        assert!(pc_features(&emb, Some(&[0])).is_err());
        assert!(pc_features(&emb, Some(&[33])).is_err());
    }

    #[test]
    fn parses_cli_modes() {
        assert_eq!("mean".parse::<FeatureMode>().unwrap(), FeatureMode::MeanCorrectness);
        assert_eq!("all".parse::<FeatureMode>().unwrap(), FeatureMode::FullEmbedding);
        assert_eq!(
            "pc:1,3".parse::<FeatureMode>().unwrap(),
            FeatureMode::PcSubspace(vec![1, 3])
        );
        assert!("pc:x".parse::<FeatureMode>().is_err());
        assert_eq!(FeatureMode::PcSubspace(vec![2, 4]).to_string(), "pc:2,4");
    }
}
