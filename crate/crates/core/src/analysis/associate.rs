use serde::{Deserialize, Serialize};

use super::ops::{
    fisher_z_combine, kruskal_wallis, one_sided_score, spearman_test, stouffer, two_sided_score,
    weighted_mean,
};
use crate::error::{Error, Result};
use crate::stats::normal_sf;

/// Number of difficulty strata.
pub const DEFAULT_BINS: usize = 20;

/// A factor's per-item values.
#[derive(Debug, Clone, Copy)]
pub enum FactorValues<'a> {
    Continuous(&'a [f64]),
    /// `None` marks an unlabelled item, left out of the test.
    Categorical(&'a [Option<String>]),
}

impl FactorValues<'_> {
    pub fn len(&self) -> usize {
        match self {
            FactorValues::Continuous(v) => v.len(),
            FactorValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How per-bin Spearman p-values become normal scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpearmanScore {
    /// `sign(ρ_b)·Φ⁻¹(1 − p_b/2)`: opposite-signed bins cancel.
    #[default]
    Signed,
    /// `Φ⁻¹(1 − p_b/2)` regardless of direction.
    Unsigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratifyOptions {
    pub bins: usize,
    pub spearman_score: SpearmanScore,
}

impl Default for StratifyOptions {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            spearman_score: SpearmanScore::Signed,
        }
    }
}

/// Effect size (ρ or ε²) and p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub effect: f64,
    pub p: f64,
    /// Bins that contributed (1 for global tests).
    pub bins_used: usize,
}

fn run_operator(scores: &[f64], factor: FactorValues<'_>, items: &[usize]) -> Result<(f64, f64, usize)> {
    match factor {
        FactorValues::Continuous(psi) => {
            let x: Vec<f64> = items.iter().map(|&i| scores[i]).collect();
            let y: Vec<f64> = items.iter().map(|&i| psi[i]).collect();
            let t = spearman_test(&x, &y)?;
            Ok((t.rho, t.p, t.n))
        }
        FactorValues::Categorical(labels) => {
            let kept: Vec<usize> = items.iter().copied().filter(|&i| labels[i].is_some()).collect();
            let x: Vec<f64> = kept.iter().map(|&i| scores[i]).collect();
            let g: Vec<&str> = kept.iter().map(|&i| labels[i].as_deref().unwrap_or_default()).collect();
            let kw = kruskal_wallis(&x, &g)?;
            Ok((kw.epsilon_sq, kw.p, kw.n))
        }
    }
}

fn check_lengths(scores: &[f64], factor: FactorValues<'_>) -> Result<()> {
    if scores.len() != factor.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} factor values",
            scores.len(),
            factor.len()
        )));
    }
    Ok(())
}

/// Spearman (continuous) or Kruskal–Wallis (categorical) over all items.
pub fn global_associate(scores: &[f64], factor: FactorValues<'_>) -> Result<Association> {
    check_lengths(scores, factor)?;
    let all: Vec<usize> = (0..scores.len()).collect();
    let (effect, p, _) = run_operator(scores, factor, &all)?;
    Ok(Association {
        effect,
        p,
        bins_used: 1,
    })
}

/// Contiguous blocks of items sorted by `(δ, index)`; the first `n mod B` blocks get one extra item.
pub fn difficulty_bins(difficulty: &[f64], bins: usize) -> Result<Vec<Vec<usize>>> {
    let n = difficulty.len();
    if bins == 0 || n < bins {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} items into {bins} bins"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| difficulty[a].total_cmp(&difficulty[b]).then(a.cmp(&b)));
    let base = n / bins;
    let extra = n % bins;
    let mut out = Vec::with_capacity(bins);
    let mut start = 0;
    for b in 0..bins {
        let len = base + usize::from(b < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Per-bin association within difficulty strata, combined by weighted Stouffer
/// (`w_b = √n_b`) and Fisher z (Spearman) or size-weighted ε² (Kruskal–Wallis).
pub fn stratified_associate(
    scores: &[f64],
    factor: FactorValues<'_>,
    difficulty: &[f64],
    options: &StratifyOptions,
) -> Result<Association> {
    check_lengths(scores, factor)?;
    if difficulty.len() != scores.len() {
        return Err(Error::InvalidArgument("difficulty length differs from scores".into()));
    }
    let mut effects = Vec::new();
    let mut pvals = Vec::new();
    let mut sizes = Vec::new();
    for bin in difficulty_bins(difficulty, options.bins)? {
        match run_operator(scores, factor, &bin) {
            Ok((e, p, n)) => {
                effects.push(e);
                pvals.push(p);
                sizes.push(n);
            }
            Err(Error::Undefined(_)) => {}
            Err(e) => return Err(e),
        }
    }
    combine_bins(factor, &effects, &pvals, &sizes, options.spearman_score)
}

/// Combines per-bin `(effect, p, n)` triples into one association.
pub fn combine_bins(
    factor: FactorValues<'_>,
    effects: &[f64],
    pvals: &[f64],
    sizes: &[usize],
    spearman_score: SpearmanScore,
) -> Result<Association> {
    if effects.is_empty() {
        return Err(Error::Undefined("every stratum was undefined".into()));
    }
    let weights: Vec<f64> = sizes.iter().map(|&n| (n as f64).sqrt()).collect();
    let (effect, p) = match factor {
        FactorValues::Continuous(_) => {
            let s: Vec<f64> = effects
                .iter()
                .zip(pvals)
                .map(|(&rho, &p)| match spearman_score {
                    SpearmanScore::Signed if rho < 0.0 => -two_sided_score(p),
                    SpearmanScore::Signed if rho == 0.0 => 0.0,
                    _ => two_sided_score(p),
                })
                .collect();
            let z = stouffer(&s, &weights)?;
            (fisher_z_combine(effects, sizes)?, (2.0 * normal_sf(z.abs())).min(1.0))
        }
        FactorValues::Categorical(_) => {
            let s: Vec<f64> = pvals.iter().map(|&p| one_sided_score(p)).collect();
            let z = stouffer(&s, &weights)?;
            (weighted_mean(effects, sizes)?, normal_sf(z))
        }
    };
    Ok(Association {
        effect,
        p,
        bins_used: effects.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_are_balanced_and_sorted() {
        let d: Vec<f64> = (0..45).map(|i| f64::from((i * 7) % 10)).collect();
        let bins = difficulty_bins(&d, 20).unwrap();
        let sizes: Vec<usize> = bins.iter().map(Vec::len).collect();
        assert_eq!(&sizes[..5], &[3; 5]);
        assert!(sizes[5..].iter().all(|&s| s == 2));
        let flat: Vec<usize> = bins.concat();
        for w in flat.windows(2) {
            assert!((d[w[0]], w[0]) <= (d[w[1]], w[1]));
        }
        assert!(difficulty_bins(&d[..10], 20).is_err());
    }

    #[test]
    fn kw_two_bins_at_five_percent() {
        let labels: Vec<Option<String>> = vec![];
        let a = combine_bins(
            FactorValues::Categorical(&labels),
            &[0.1, 0.3],
            &[0.05, 0.05],
            &[16, 16],
            SpearmanScore::Signed,
        )
        .unwrap();
        assert!((a.p - 0.0100).abs() < 1e-4);
        assert!((a.effect - 0.2).abs() < 1e-15);
    }

    #[test]
    fn fisher_two_bins() {
        let empty: Vec<f64> = vec![];
        let a = combine_bins(
            FactorValues::Continuous(&empty),
            &[0.0, 0.8],
            &[1.0, 0.001],
            &[13, 13],
            SpearmanScore::Signed,
        )
        .unwrap();
        assert!((a.effect - 0.5).abs() < 1e-12);
    }

    #[test]
    fn signed_scores_cancel_opposite_bins() {
        let empty: Vec<f64> = vec![];
        let f = FactorValues::Continuous(&empty);
        let signed = combine_bins(f, &[0.5, -0.5], &[0.01, 0.01], &[30, 30], SpearmanScore::Signed).unwrap();
        assert!((signed.p - 1.0).abs() < 1e-12);
        let unsigned = combine_bins(f, &[0.5, -0.5], &[0.01, 0.01], &[30, 30], SpearmanScore::Unsigned).unwrap();
        assert!(unsigned.p < 0.01);
    }

    #[test]
    fn single_bin_returns_its_statistics() {
        let empty: Vec<f64> = vec![];
        let a = combine_bins(FactorValues::Continuous(&empty), &[0.37], &[0.02], &[40], SpearmanScore::Signed).unwrap();
        assert!((a.effect - 0.37).abs() < 1e-14);
        assert!((a.p - 0.02).abs() < 1e-12);
        let labels: Vec<Option<String>> = vec![];
        let k = combine_bins(FactorValues::Categorical(&labels), &[0.11], &[0.3], &[40], SpearmanScore::Signed).unwrap();
        assert_eq!(k.effect, 0.11);
        assert!((k.p - 0.3).abs() < 1e-12);
    }

    #[test]
    fn global_dispatch() {
        let xi: Vec<f64> = (0..30).map(|i| f64::from(i).sin()).collect();
        let same = global_associate(&xi, FactorValues::Continuous(&xi)).unwrap();
        assert!((same.effect - 1.0).abs() < 1e-15);
        let one: Vec<Option<String>> = vec![Some("a".into()); 30];
        assert!(global_associate(&xi, FactorValues::Categorical(&one)).is_err());
        let two: Vec<Option<String>> = (0..30).map(|i| Some(if xi[i] > 0.0 { "p" } else { "n" }.into())).collect();
        let kw = global_associate(&xi, FactorValues::Categorical(&two)).unwrap();
        assert!(kw.p < 1e-4 && kw.effect > 0.5);
    }

    #[test]
    fn undefined_bins_are_dropped() {
        // constant scores in the first half of the difficulty order
        let n = 40;
        let d: Vec<f64> = (0..n).map(f64::from).collect();
        let xi: Vec<f64> = (0..n).map(|i| if i < 20 { 0.0 } else { f64::from(i % 7) }).collect();
        let psi: Vec<f64> = (0..n).map(|i| f64::from((i * 3) % 11)).collect();
        let opts = StratifyOptions { bins: 4, ..Default::default() };
        let a = stratified_associate(&xi, FactorValues::Continuous(&psi), &d, &opts).unwrap();
        assert_eq!(a.bins_used, 2);
        let flat = vec![0.0; n as usize];
        assert!(matches!(
            stratified_associate(&flat, FactorValues::Continuous(&psi), &d, &opts),
            Err(Error::Undefined(_))
        ));
    }
}
