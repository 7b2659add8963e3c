use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Cumulative explained-variance level used for the effective rank.
pub const EFFECTIVE_RANK_LEVEL: f64 = 0.99;

/// Principal axes of the item covariance, ordered by descending variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaDecomposition {
    pub mean: Array1<f64>,
    /// `d × d`, one axis per column.
    pub axes: Array2<f64>,
    /// `n × d` projections of the centered rows.
    pub scores: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub effective_rank_99: usize,
}

impl PcaDecomposition {
    pub fn axis(&self, k: usize) -> ndarray::ArrayView1<'_, f64> {
        self.axes.column(k)
    }
}

pub fn pca_decompose(data: ArrayView2<'_, f64>) -> Result<PcaDecomposition> {
    let (n, d) = data.dim();
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 rows".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("PCA needs at least one column".into()));
    }
    let mean = data.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &data - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let total: f64 = cov.diag().sum();
    let scale = data.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if !(total > 1e-24 * scale * scale) {
        return Err(Error::Undefined("PCA of rank-0 data (all rows identical)".into()));
    }

    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |a, b| cov[[a, b]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut axes = Array2::zeros((d, d));
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let (mut arg, mut best) = (0, -1.0);
        for a in 0..d {
            if col[a].abs() > best + 1e-12 {
                best = col[a].abs();
                arg = a;
            }
        }
        let sign = if col[arg] < 0.0 { -1.0 } else { 1.0 };
        for a in 0..d {
            axes[[a, k]] = sign * col[a];
        }
        eigenvalues.push(eig.eigenvalues[src].max(0.0));
    }
    let sum: f64 = eigenvalues.iter().sum();
    let explained_variance_ratio: Vec<f64> = eigenvalues.iter().map(|v| v / sum).collect();
    let mut cumulative = 0.0;
    let mut effective_rank_99 = d;
    for (k, r) in explained_variance_ratio.iter().enumerate() {
        cumulative += r;
        if cumulative >= EFFECTIVE_RANK_LEVEL - 1e-12 {
            effective_rank_99 = k + 1;
            break;
        }
    }
    let scores = centered.dot(&axes);
    Ok(PcaDecomposition {
        mean,
        axes,
        scores,
        eigenvalues,
        explained_variance_ratio,
        effective_rank_99,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn line_has_rank_one() {
        let data = Array2::from_shape_fn((6, 4), |(i, k)| (i as f64 - 2.0) * [1.0, -2.0, 0.5, 0.0][k] + 3.0);
        let p = pca_decompose(data.view()).unwrap();
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(p.explained_variance_ratio[1..].iter().all(|r| r.abs() < 1e-12));
        assert_eq!(p.effective_rank_99, 1);
        // largest loading is -2 / |v|, flipped positive
        assert!(p.axes[[1, 0]] > 0.0);
        assert!(p.scores.column(0).sum().abs() < 1e-9);
    }

    #[test]
    fn axes_orthonormal_and_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = Array2::from_shape_fn((200, 6), |(_, k)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * (k + 1) as f64
        });
        let p = pca_decompose(data.view()).unwrap();
        let gram = p.axes.t().dot(&p.axes);
        for a in 0..6 {
            for b in 0..6 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gram[[a, b]] - want).abs() < 1e-8);
            }
        }
        assert!(p.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
        let centered = &data - &p.mean;
        let direct = centered.row(17).dot(&p.axis(2));
        assert!((direct - p.scores[[17, 2]]).abs() < 1e-10);
    }

    #[test]
    fn isotropic_plane_splits_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = Array2::from_shape_simple_fn((10_000, 2), || StandardNormal.sample(&mut rng));
        let p = pca_decompose(data.view()).unwrap();
        for r in &p.explained_variance_ratio {
            assert!((r - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn identical_rows_fail() {
        let data = Array2::from_elem((5, 3), 0.25);
        assert!(pca_decompose(data.view()).is_err());
        assert!(pca_decompose(Array2::<f64>::zeros((1, 3)).view()).is_err());
    }
}
