use ndarray::{Array1, Axis};

use crate::dataio::{ItemMeta, ResponseMatrix};
use crate::error::{Error, Result};

/// Share of models in each Kelley tail.
pub const KELLEY_FRACTION: f64 = 0.27;

/// `δ_i`: pass rate over all evaluated models.
pub fn difficulty(all_responses: &ResponseMatrix) -> Result<Array1<f64>> {
    if all_responses.num_models() == 0 {
        return Err(Error::InvalidArgument("difficulty needs at least one model".into()));
    }
    Ok(all_responses
        .values()
        .mapv(f64::from)
        .mean_axis(Axis(0))
        .expect("nonempty"))
}

/// `q = max(1, ⌊0.27·|U|⌋)`.
pub fn kelley_group_size(num_models: usize) -> usize {
    ((KELLEY_FRACTION * num_models as f64 + 1e-9).floor() as usize).max(1)
}

/// `γ_i = π_hi − π_lo` over the top and bottom `q` models by mean score.
pub fn discrimination_kelley(all_responses: &ResponseMatrix) -> Result<Array1<f64>> {
    let m = all_responses.num_models();
    if m < 2 {
        return Err(Error::InvalidArgument("discrimination needs at least two models".into()));
    }
    let q = kelley_group_size(m);
    let scores: Vec<f64> = (0..m).map(|r| all_responses.accuracy(r)).collect();
    let mut hi: Vec<usize> = (0..m).collect();
    hi.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut lo: Vec<usize> = (0..m).collect();
    lo.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let rate = |rows: &[usize]| -> Array1<f64> {
        let mut acc = Array1::<f64>::zeros(all_responses.num_items());
        for &r in rows {
            acc += &all_responses.row(r).mapv(f64::from);
        }
        acc / rows.len() as f64
    };
    Ok(rate(&hi[..q]) - rate(&lo[..q]))
}

/// Interpretable per-item factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemFactors {
    pub difficulty: Array1<f64>,
    pub discrimination: Array1<f64>,
    /// Missing labels leave the item out of that factor's tests.
    pub subtask: Vec<Option<String>>,
    pub ability: Vec<Option<String>>,
}

impl ItemFactors {
    pub fn from_responses(all_responses: &ResponseMatrix, items: &ItemMeta) -> Result<Self> {
        items.check_len(all_responses.num_items())?;
        Ok(ItemFactors {
            difficulty: difficulty(all_responses)?,
            discrimination: discrimination_kelley(all_responses)?,
            subtask: items.items.iter().map(|i| i.subtask.clone()).collect(),
            ability: items.items.iter().map(|i| i.ability.clone()).collect(),
        })
    }

    pub fn num_items(&self) -> usize {
        self.difficulty.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn matrix(rows: &[&[u8]]) -> ResponseMatrix {
        let m = rows.len();
        let n = rows[0].len();
        let names = (0..m).map(|k| format!("m{k}")).collect();
        ResponseMatrix::new(names, Array2::from_shape_vec((m, n), rows.concat()).unwrap()).unwrap()
    }

    #[test]
    fn group_sizes() {
        assert_eq!(kelley_group_size(10), 2);
        assert_eq!(kelley_group_size(2), 1);
        assert_eq!(kelley_group_size(100), 27);
        assert_eq!(kelley_group_size(4), 1);
    }

    #[test]
    fn difficulty_is_pass_rate() {
        let rows: Vec<Vec<u8>> = (0..10).map(|k| vec![1, u8::from(k < 4)]).collect();
        let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
        let d = difficulty(&matrix(&refs)).unwrap();
        assert_eq!(d[0], 1.0);
        assert!((d[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn kelley_extremes() {
        // scores: m0..m4 strong to weak; item 0 separates, item 1 constant, item 2 reversed
        let r = matrix(&[
            &[1, 1, 0, 1, 1],
            &[1, 1, 0, 1, 1],
            &[1, 1, 1, 1, 0],
            &[0, 1, 1, 0, 0],
            &[0, 1, 1, 0, 0],
        ]);
        let g = discrimination_kelley(&r).unwrap();
        assert_eq!(g[0], 1.0);
        assert_eq!(g[1], 0.0);
        assert_eq!(g[2], -1.0);
    }

    #[test]
    fn kelley_ties_prefer_lower_index() {
        // all models score 0.5: hi = {m0}, lo = {m0} → γ = 0
        let r = matrix(&[&[1, 0], &[0, 1], &[1, 0], &[0, 1]]);
        let g = discrimination_kelley(&r).unwrap();
        assert_eq!(g.to_vec(), vec![0.0, 0.0]);
    }
}
