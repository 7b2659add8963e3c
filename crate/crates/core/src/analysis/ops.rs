use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats::{average_ranks, normal_quantile, pearson, tie_counts};

/// Largest |ρ| passed to `atanh`.
const RHO_LIMIT: f64 = 1.0 - 1e-15;
/// Bound on per-bin normal scores so extreme p-values stay finite.
const SCORE_LIMIT: f64 = 37.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearmanTest {
    pub rho: f64,
    pub p: f64,
    pub n: usize,
}

/// Rank correlation with a two-sided p from the t approximation on `n − 2` d.o.f.
pub fn spearman_test(x: &[f64], y: &[f64]) -> Result<SpearmanTest> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidArgument("spearman inputs differ in length".into()));
    }
    if n < 4 {
        return Err(Error::Undefined(format!("spearman test needs n >= 4, got {n}")));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::Undefined("spearman test on constant input".into()))?
        .clamp(-1.0, 1.0);
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(SpearmanTest { rho, p, n })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KruskalWallis {
    pub h: f64,
    pub p: f64,
    pub epsilon_sq: f64,
    /// Retained groups.
    pub groups: usize,
    /// Retained items.
    pub n: usize,
}

/// Kruskal–Wallis H with tie correction over groups having at least two members.
pub fn kruskal_wallis<G: Ord>(values: &[f64], groups: &[G]) -> Result<KruskalWallis> {
    if values.len() != groups.len() {
        return Err(Error::InvalidArgument("values and groups differ in length".into()));
    }
    let mut by_group: BTreeMap<&G, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_group.entry(g).or_default().push(i);
    }
    let retained: Vec<Vec<usize>> = by_group.into_values().filter(|m| m.len() >= 2).collect();
    let g = retained.len();
    if g < 2 {
        return Err(Error::Undefined(format!(
            "kruskal-wallis needs 2 groups with >= 2 members, found {g}"
        )));
    }
    let kept: Vec<f64> = retained.iter().flatten().map(|&i| values[i]).collect();
    let n = kept.len();
    let nf = n as f64;
    let ranks = average_ranks(&kept);
    let ties: f64 = tie_counts(&kept)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    let h = if correction <= 1e-12 {
        0.0
    } else {
        let mut offset = 0;
        let mut sum = 0.0;
        for members in &retained {
            let r: f64 = ranks[offset..offset + members.len()].iter().sum();
            sum += r * r / members.len() as f64;
            offset += members.len();
        }
        let raw = 12.0 / (nf * (nf + 1.0)) * sum - 3.0 * (nf + 1.0);
        (raw / correction).max(0.0)
    };
    let df = (g - 1) as f64;
    let p = ChiSquared::new(df).expect("df > 0").sf(h).clamp(0.0, 1.0);
    let epsilon_sq = ((h - df) / (nf - g as f64)).max(0.0);
    Ok(KruskalWallis {
        h,
        p,
        epsilon_sq,
        groups: g,
        n,
    })
}

/// `Φ⁻¹(1 − p)`, bounded.
pub fn one_sided_score(p: f64) -> f64 {
    (-normal_quantile(p.clamp(0.0, 1.0))).clamp(-SCORE_LIMIT, SCORE_LIMIT)
}

/// `Φ⁻¹(1 − p/2)`, bounded; non-negative.
pub fn two_sided_score(p: f64) -> f64 {
    (-normal_quantile(0.5 * p.clamp(0.0, 1.0))).clamp(0.0, SCORE_LIMIT)
}

/// Weighted Stouffer combination `Σ w_b s_b / √(Σ w_b²)`.
pub fn stouffer(scores: &[f64], weights: &[f64]) -> Result<f64> {
    if scores.len() != weights.len() || scores.is_empty() {
        return Err(Error::InvalidArgument("stouffer needs equal nonempty inputs".into()));
    }
    let num: f64 = scores.iter().zip(weights).map(|(s, w)| s * w).sum();
    let den: f64 = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    if !(den > 0.0) {
        return Err(Error::InvalidArgument("stouffer weights are all zero".into()));
    }
    Ok(num / den)
}

/// `tanh` of the `(n_b − 3)`-weighted mean of `atanh ρ_b`.
pub fn fisher_z_combine(rhos: &[f64], sizes: &[usize]) -> Result<f64> {
    if rhos.len() != sizes.len() || rhos.is_empty() {
        return Err(Error::InvalidArgument("fisher-z needs equal nonempty inputs".into()));
    }
    if sizes.iter().any(|&n| n <= 3) {
        return Err(Error::InvalidArgument("fisher-z weights need n > 3".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&r, &n) in rhos.iter().zip(sizes) {
        let w = n as f64 - 3.0;
        num += w * r.clamp(-RHO_LIMIT, RHO_LIMIT).atanh();
        den += w;
    }
    Ok((num / den).tanh())
}

/// Size-weighted mean of per-bin effects.
pub fn weighted_mean(values: &[f64], sizes: &[usize]) -> Result<f64> {
    let total: usize = sizes.iter().sum();
    if values.len() != sizes.len() || total == 0 {
        return Err(Error::InvalidArgument("weighted mean needs positive total weight".into()));
    }
    let total = total as f64;
    Ok(values.iter().zip(sizes).map(|(v, &n)| v * (n as f64 / total)).sum())
}

/// Benjamini–Hochberg step-up q-values in input order.
pub fn bh_fdr(pvals: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(pvals[i] * m as f64 / (rank + 1) as f64);
        q[i] = running.min(1.0);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_sf;

    #[test]
    fn spearman_test_examples() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let s = spearman_test(&x, &x).unwrap();
        assert_eq!((s.rho, s.p), (1.0, 0.0));
        // symmetric V shape: ρ = 0 exactly
        let v = [2.0, 1.0, 0.0, 1.0, 2.0];
        let s = spearman_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &v).unwrap();
        assert!(s.rho.abs() < 1e-15);
        assert!((s.p - 1.0).abs() < 1e-12);
        assert!(spearman_test(&[1.0; 5], &x[..5]).is_err());
        assert!(spearman_test(&x[..3], &x[..3]).is_err());
    }

    #[test]
    fn spearman_p_at_half() {
        // find any n = 20 pair with ρ = 0.5 by construction is awkward; check the t path directly
        let t = 0.5 * (18.0f64 / 0.75).sqrt();
        assert!((t - 2.449489742783178).abs() < 1e-12);
        let p = 2.0 * StudentsT::new(0.0, 1.0, 18.0).unwrap().sf(t);
        assert!((p - 0.0248).abs() < 5e-4, "{p}");
    }

    #[test]
    fn kruskal_worked_example() {
        let kw = kruskal_wallis(&[1.0, 2.0, 3.0, 7.0, 8.0, 9.0], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((kw.h - 27.0 / 7.0).abs() < 1e-12);
        assert!((kw.epsilon_sq - (27.0 / 7.0 - 1.0) / 4.0).abs() < 1e-12);
        assert!((kw.p - normal_sf((27.0f64 / 7.0).sqrt()) * 2.0).abs() < 1e-10);
    }

    #[test]
    fn kruskal_edge_cases() {
        let ties = kruskal_wallis(&[4.0; 6], &["a", "a", "b", "b", "c", "c"]).unwrap();
        assert_eq!((ties.h, ties.epsilon_sq, ties.p), (0.0, 0.0, 1.0));
        let mixed = kruskal_wallis(&[1.0, 4.0, 2.0, 3.0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(mixed.epsilon_sq, 0.0);
        // singleton group dropped with its item
        let dropped = kruskal_wallis(&[1.0, 2.0, 3.0, 7.0, 8.0, 9.0, 100.0], &[0, 0, 0, 1, 1, 1, 2]).unwrap();
        assert_eq!((dropped.groups, dropped.n), (2, 6));
        assert!(kruskal_wallis(&[1.0, 2.0, 3.0], &[0, 0, 1]).is_err());
    }

    #[test]
    fn stouffer_worked_example() {
        let s = one_sided_score(0.05);
        assert!((s - 1.6448536269514722).abs() < 1e-9);
        let z = stouffer(&[s, s], &[1.0, 1.0]).unwrap();
        assert!((z - 2.3262).abs() < 1e-4);
        assert!((normal_sf(z) - 0.0100).abs() < 1e-4);
        assert!((two_sided_score(0.05) - 1.959963984540054).abs() < 1e-9);
        assert!(one_sided_score(0.0).is_finite() && two_sided_score(0.0).is_finite());
    }

    #[test]
    fn fisher_z_worked_example() {
        let e = fisher_z_combine(&[0.0, 0.8], &[13, 13]).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
        assert!((fisher_z_combine(&[0.3; 4], &[5, 9, 20, 40]).unwrap() - 0.3).abs() < 1e-12);
        assert!(fisher_z_combine(&[1.0], &[10]).unwrap().is_finite());
        assert!(fisher_z_combine(&[0.1], &[3]).is_err());
    }

    #[test]
    fn bh_examples() {
        assert_eq!(bh_fdr(&[0.01, 0.02, 0.03]).unwrap(), vec![0.03; 3]);
        assert_eq!(bh_fdr(&[0.2]).unwrap(), vec![0.2]);
        assert_eq!(bh_fdr(&[0.9, 0.01]).unwrap(), vec![0.9, 0.02]);
        assert!(bh_fdr(&[1.2]).is_err());
        assert!(bh_fdr(&[]).unwrap().is_empty());
    }
}
