use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::{distinct_rows, kmeans, Clustering, Geometry};
use super::ConsensusEmbeddings;
use crate::dataio::ResponseMatrix;
use crate::error::{Error, Result};

/// Relative slack under which two anchor scores count as tied.
const ANCHOR_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Repcore,
    Random,
    BinaryKmeans,
}

impl SelectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Repcore => "repcore",
            SelectionMethod::Random => "random",
            SelectionMethod::BinaryKmeans => "binary-kmeans",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "repcore" => Ok(SelectionMethod::Repcore),
            "random" => Ok(SelectionMethod::Random),
            "binary-kmeans" | "binary_kmeans" => Ok(SelectionMethod::BinaryKmeans),
            other => Err(Error::InvalidArgument(format!("unknown selection method `{other}`"))),
        }
    }
}

/// Selected anchor items, ordered by cluster id (or draw order for random).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coreset {
    pub method: SelectionMethod,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub anchors: Vec<usize>,
}

impl Coreset {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Membership mask over `num_items`.
    pub fn mask(&self, num_items: usize) -> Vec<bool> {
        let mut m = vec![false; num_items];
        for &a in &self.anchors {
            m[a] = true;
        }
        m
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self).expect("serializable"))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Coreset =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if c.k != c.anchors.len() {
            return Err(Error::format(path, "K disagrees with anchor count"));
        }
        let mut sorted = c.anchors.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != c.anchors.len() {
            return Err(Error::format(path, "duplicate anchors"));
        }
        Ok(c)
    }
}

/// Per cluster, the member scoring highest against its centroid; ties (within
/// a relative 1e-12) go to the lowest item index.
fn pick_anchors(clustering: &Clustering, data: &Array2<f64>) -> Vec<usize> {
    let mut best: Vec<Option<(usize, f64)>> = vec![None; clustering.k];
    for (i, &c) in clustering.assignment.iter().enumerate() {
        let s = clustering
            .geometry
            .similarity(data.row(i), clustering.centroids.row(c));
        match best[c] {
            Some((_, b)) if s <= b + ANCHOR_TIE * b.abs().max(1.0) => {}
            _ => best[c] = Some((i, s)),
        }
    }
    best.into_iter()
        .map(|b| b.expect("cluster reseeding leaves no cluster empty").0)
        .collect()
}

/// Tops `anchors` up to `k` by visiting clusters round-robin in descending
/// size order and taking each one's lowest unused member.
fn fill_from_largest(clustering: &Clustering, anchors: &mut Vec<usize>, k: usize) {
    let mut members: Vec<Vec<usize>> = (0..clustering.k).map(|c| clustering.members(c)).collect();
    let mut order: Vec<usize> = (0..clustering.k).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(members[c].len()), c));
    for m in &mut members {
        m.retain(|i| !anchors.contains(i));
        m.reverse();
    }
    while anchors.len() < k {
        let before = anchors.len();
        for &c in &order {
            if anchors.len() == k {
                break;
            }
            if let Some(i) = members[c].pop() {
                anchors.push(i);
            }
        }
        if anchors.len() == before {
            break;
        }
    }
}

/// Anchor per spherical cluster: `argmax_{i ∈ I_k} cos(ẽ_i, μ_k)`.
pub fn select_anchors(clustering: &Clustering, emb: &ConsensusEmbeddings, seed: u64) -> Result<Coreset> {
    if clustering.assignment.len() != emb.num_items() {
        return Err(Error::InvalidArgument(
            "clustering and embeddings disagree on item count".into(),
        ));
    }
    let anchors = pick_anchors(clustering, &emb.vectors);
    Ok(Coreset {
        method: SelectionMethod::Repcore,
        seed,
        k: anchors.len(),
        anchors,
    })
}

/// `k` distinct items drawn uniformly, returned in ascending order.
pub fn select_random(num_items: usize, k: usize, seed: u64) -> Result<Coreset> {
    if k > num_items {
        return Err(Error::InvalidArgument(format!(
            "K = {k} exceeds {num_items} items"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut anchors = rand::seq::index::sample(&mut rng, num_items, k).into_vec();
    anchors.sort_unstable();
    Ok(Coreset {
        method: SelectionMethod::Random,
        seed,
        k,
        anchors,
    })
}

/// Euclidean k-means over item correctness columns; anchor = member nearest its centroid.
pub fn select_binary_kmeans(
    source_responses: &ResponseMatrix,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Coreset> {
    let n = source_responses.num_items();
    if k > n {
        return Err(Error::InvalidArgument(format!("K = {k} exceeds {n} items")));
    }
    let columns: Array2<f64> = source_responses.values().t().mapv(f64::from);
    // Few sources can leave fewer distinct columns than K.
    let k_eff = k.min(distinct_rows(columns.view()));
    let clustering = kmeans(columns.view(), k_eff, Geometry::Euclidean, seed, restarts)?;
    let mut anchors = pick_anchors(&clustering, &columns);
    if k_eff < k {
        fill_from_largest(&clustering, &mut anchors, k);
    }
    Ok(Coreset {
        method: SelectionMethod::BinaryKmeans,
        seed,
        k,
        anchors,
    })
}
