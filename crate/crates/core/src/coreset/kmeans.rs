//! Lloyd-style k-means on the unit sphere (cosine) or in Euclidean space.
//!
//! Both variants maximize a summed similarity to the assigned centroid:
//! `cos(x, μ)` on the sphere, `−‖x − μ‖²` in Euclidean space. Ties always go
//! to the lowest cluster (or item) index.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ConsensusEmbeddings;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// Rows are unit vectors; centroids are normalized sums.
    Cosine,
    /// Centroids are means.
    Euclidean,
}

impl Geometry {
    pub fn similarity(self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match self {
            Geometry::Cosine => a.dot(&b),
            Geometry::Euclidean => -a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>(),
        }
    }

    fn self_similarity(self) -> f64 {
        match self {
            Geometry::Cosine => 1.0,
            Geometry::Euclidean => 0.0,
        }
    }

    /// Centroid from a member sum; `fallback` is used when a spherical sum vanishes.
    fn centroid(self, sum: &Array1<f64>, count: usize, fallback: ArrayView1<'_, f64>) -> Array1<f64> {
        match self {
            Geometry::Cosine => {
                let norm = sum.dot(sum).sqrt();
                if norm > 1e-300 {
                    sum / norm
                } else {
                    fallback.to_owned()
                }
            }
            Geometry::Euclidean => sum / count as f64,
        }
    }
}

/// A partition of the items into `k` clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    pub assignment: Vec<usize>,
    /// `k × dim`.
    pub centroids: Array2<f64>,
    /// Summed similarity of every item to its centroid.
    pub objective: f64,
    /// Objective after each centroid update of the winning restart.
    pub objective_trace: Vec<f64>,
    pub restart: usize,
    pub geometry: Geometry,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    /// Recomputes the objective from the assignment and centroids.
    pub fn recompute_objective(&self, data: ArrayView2<'_, f64>) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .map(|(i, &c)| self.geometry.similarity(data.row(i), self.centroids.row(c)))
            .sum()
    }
}

/// Number of distinct rows (exact equality).
pub fn distinct_rows(data: ArrayView2<'_, f64>) -> usize {
    let mut rows: Vec<Vec<u64>> = data
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

fn argmax_cluster(geometry: Geometry, x: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (k, c) in centroids.rows().into_iter().enumerate() {
        let s = geometry.similarity(x, c);
        if s > best_sim {
            best_sim = s;
            best = k;
        }
    }
    best
}

fn plus_plus_init(
    data: ArrayView2<'_, f64>,
    k: usize,
    geometry: Geometry,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = data.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut gap: Vec<f64> = (0..n)
        .map(|i| (geometry.self_similarity() - geometry.similarity(data.row(i), data.row(chosen[0]))).max(0.0))
        .collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&gap) {
            Ok(dist) => dist.sample(rng),
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        chosen.push(next);
        for i in 0..n {
            let g = (geometry.self_similarity() - geometry.similarity(data.row(i), data.row(next))).max(0.0);
            if g < gap[i] {
                gap[i] = g;
            }
        }
        gap[next] = 0.0;
    }
    chosen
}

struct Partition {
    assignment: Vec<usize>,
    centroids: Array2<f64>,
}

impl Partition {
    /// Centroids from the assignment, reseeding empty clusters with the item
    /// least similar to its own centroid (taken from a cluster with ≥ 2 members).
    fn update_centroids(&mut self, data: ArrayView2<'_, f64>, geometry: Geometry) {
        let k = self.centroids.nrows();
        let dim = data.ncols();
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        let mut first = vec![usize::MAX; k];
        for (i, &c) in self.assignment.iter().enumerate() {
            let mut s = sums.row_mut(c);
            s += &data.row(i);
            counts[c] += 1;
            if first[c] == usize::MAX {
                first[c] = i;
            }
        }
        let centroid_of = |c: usize, sums: &Array2<f64>, counts: &[usize], first: &[usize]| {
            geometry.centroid(&sums.row(c).to_owned(), counts[c], data.row(first[c]))
        };
        for c in 0..k {
            if counts[c] > 0 {
                let cen = centroid_of(c, &sums, &counts, &first);
                self.centroids.row_mut(c).assign(&cen);
            }
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let mut worst = usize::MAX;
            let mut worst_sim = f64::INFINITY;
            for (i, &c) in self.assignment.iter().enumerate() {
                if counts[c] < 2 {
                    continue;
                }
                let s = geometry.similarity(data.row(i), self.centroids.row(c));
                if s < worst_sim {
                    worst_sim = s;
                    worst = i;
                }
            }
            let donor = self.assignment[worst];
            self.assignment[worst] = empty;
            counts[donor] -= 1;
            counts[empty] = 1;
            {
                let mut s = sums.row_mut(donor);
                s -= &data.row(worst);
            }
            sums.row_mut(empty).assign(&data.row(worst));
            first[empty] = worst;
            first[donor] = self
                .assignment
                .iter()
                .position(|&c| c == donor)
                .expect("donor keeps a member");
            self.centroids.row_mut(empty).assign(&data.row(worst));
            let cen = centroid_of(donor, &sums, &counts, &first);
            self.centroids.row_mut(donor).assign(&cen);
        }
    }

    fn objective(&self, data: ArrayView2<'_, f64>, geometry: Geometry) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .map(|(i, &c)| geometry.similarity(data.row(i), self.centroids.row(c)))
            .sum()
    }

    fn reassign(&self, data: ArrayView2<'_, f64>, geometry: Geometry) -> Vec<usize> {
        data.rows()
            .into_iter()
            .map(|x| argmax_cluster(geometry, x, &self.centroids))
            .collect()
    }
}

/// One seeded Lloyd run from a k-means++ style start.
pub fn lloyd(
    data: ArrayView2<'_, f64>,
    k: usize,
    geometry: Geometry,
    rng: &mut ChaCha8Rng,
    max_iterations: usize,
) -> Clustering {
    let seeds = plus_plus_init(data, k, geometry, rng);
    let mut centroids = Array2::<f64>::zeros((k, data.ncols()));
    for (c, &i) in seeds.iter().enumerate() {
        centroids.row_mut(c).assign(&data.row(i));
    }
    let mut part = Partition {
        assignment: Vec::new(),
        centroids,
    };
    part.assignment = part.reassign(data, geometry);

    let mut trace = Vec::new();
    for _ in 0..max_iterations.max(1) {
        part.update_centroids(data, geometry);
        trace.push(part.objective(data, geometry));
        let next = part.reassign(data, geometry);
        if next == part.assignment {
            break;
        }
        part.assignment = next;
    }
    Clustering {
        k,
        objective: *trace.last().expect("at least one iteration"),
        objective_trace: trace,
        assignment: part.assignment,
        centroids: part.centroids,
        restart: 0,
        geometry,
    }
}

/// Best of `restarts` independent Lloyd runs (highest objective, then lowest restart).
pub fn kmeans(
    data: ArrayView2<'_, f64>,
    k: usize,
    geometry: Geometry,
    seed: u64,
    restarts: usize,
) -> Result<Clustering> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let distinct = distinct_rows(data);
    if k > distinct {
        return Err(Error::InvalidArgument(format!(
            "K = {k} exceeds the {distinct} distinct items"
        )));
    }
    let runs: Vec<Clustering> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut c = lloyd(data, k, geometry, &mut rng, MAX_ITERATIONS);
            c.restart = r;
            c
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, c| if c.objective > best.objective { c } else { best })
        .expect("restarts >= 1");
    Ok(best)
}

/// Spherical k-means on consensus embeddings.
pub fn spherical_kmeans(
    emb: &ConsensusEmbeddings,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Clustering> {
    kmeans(emb.vectors.view(), k, Geometry::Cosine, seed, restarts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn planar(degrees: &[f64]) -> Array2<f64> {
        let mut a = Array2::zeros((degrees.len(), 2));
        for (i, d) in degrees.iter().enumerate() {
            a[[i, 0]] = d.to_radians().cos();
            a[[i, 1]] = d.to_radians().sin();
        }
        a
    }

    #[test]
    fn separates_two_planar_pairs() {
        let data = planar(&[0.0, 5.0, 90.0, 95.0]);
        let emb = ConsensusEmbeddings::from_rows(data);
        let c = spherical_kmeans(&emb, 2, 0, 10).unwrap();
        assert_eq!(c.assignment[0], c.assignment[1]);
        assert_eq!(c.assignment[2], c.assignment[3]);
        assert_ne!(c.assignment[0], c.assignment[2]);
        // optimum: two pairs 5° apart, each item at 2.5° from its centroid
        assert!((c.objective - 4.0 * 2.5f64.to_radians().cos()).abs() < 1e-12);
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let emb = ConsensusEmbeddings::from_rows(planar(&[0.0, 30.0, 70.0, 200.0, 300.0]));
        let c = spherical_kmeans(&emb, 5, 3, 2).unwrap();
        let mut seen = c.assignment.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        assert!((c.objective - 5.0).abs() < 1e-12);
    }

    #[test]
    fn trace_is_monotone_and_final_assignment_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let raw = Array2::from_shape_fn((60, 5), |_| rng.random_range(-1.0..1.0));
        let emb = ConsensusEmbeddings::from_rows(raw);
        let c = spherical_kmeans(&emb, 6, 1, 4).unwrap();
        for w in c.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{:?}", c.objective_trace);
        }
        let again: Vec<usize> = emb
            .vectors
            .rows()
            .into_iter()
            .map(|x| argmax_cluster(Geometry::Cosine, x, &c.centroids))
            .collect();
        assert_eq!(again, c.assignment);
        assert!((c.recompute_objective(emb.vectors.view()) - c.objective).abs() < 1e-9);
        for row in c.centroids.rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_clusters_for_distinct_items() {
        let emb = ConsensusEmbeddings::from_rows(planar(&[10.0, 10.0, 10.0, 50.0]));
        assert!(spherical_kmeans(&emb, 3, 0, 1).is_err());
        assert!(spherical_kmeans(&emb, 2, 0, 1).is_ok());
        assert!(spherical_kmeans(&emb, 2, 0, 0).is_err());
    }

    #[test]
    fn euclidean_groups_binary_columns() {
        let data = array![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]];
        let c = kmeans(data.view(), 2, Geometry::Euclidean, 5, 3).unwrap();
        assert_eq!(c.assignment[0], c.assignment[1]);
        assert_ne!(c.assignment[0], c.assignment[2]);
        assert_eq!(c.objective, 0.0);
    }

    #[test]
    fn restarts_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = Array2::from_shape_fn((40, 3), |_| rng.random_range(-1.0..1.0));
        let emb = ConsensusEmbeddings::from_rows(raw);
        assert_eq!(
            spherical_kmeans(&emb, 4, 7, 5).unwrap(),
            spherical_kmeans(&emb, 4, 7, 5).unwrap()
        );
    }
}
