use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::associate::{global_associate, stratified_associate, Association, FactorValues, StratifyOptions};
use super::factors::ItemFactors;
use super::ops::bh_fdr;
use super::pca::pca_decompose;
use crate::align::AlignedEmbeddings;
use crate::dataio::csv_error;
use crate::error::{Error, Result};
use crate::stats::quantile;

pub const DEFAULT_COMPONENTS: usize = 3;
pub const ASSOCIATION_CSV: &str = "association.csv";
pub const ASSOCIATION_AGGREGATE_CSV: &str = "association_aggregate.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Difficulty,
    Discrimination,
    Subtask,
    Ability,
}

impl Factor {
    pub const ALL: [Factor; 4] = [Factor::Difficulty, Factor::Discrimination, Factor::Subtask, Factor::Ability];

    fn values<'a>(&self, f: &'a ItemFactors) -> FactorValues<'a> {
        match self {
            Factor::Difficulty => FactorValues::Continuous(f.difficulty.as_slice().expect("contiguous")),
            Factor::Discrimination => FactorValues::Continuous(f.discrimination.as_slice().expect("contiguous")),
            Factor::Subtask => FactorValues::Categorical(&f.subtask),
            Factor::Ability => FactorValues::Categorical(&f.ability),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Factor::Difficulty => "difficulty",
            Factor::Discrimination => "discrimination",
            Factor::Subtask => "subtask",
            Factor::Ability => "ability",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Global,
    Stratified,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Global => "global",
            Mode::Stratified => "stratified",
        })
    }
}

/// One (snapshot, component, factor, mode) test; `None` where the test was undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    pub snapshot: String,
    /// 1-based principal component.
    pub component: usize,
    pub factor: Factor,
    pub mode: Mode,
    pub effect: Option<f64>,
    pub p: Option<f64>,
    /// BH-adjusted across factors within (snapshot, component, mode).
    pub q: Option<f64>,
}

/// Median and interquartile range over snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub iqr: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        Some(Spread {
            median: quantile(values, 0.5),
            iqr: quantile(values, 0.75) - quantile(values, 0.25),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub component: usize,
    pub factor: Factor,
    pub mode: Mode,
    pub snapshots: usize,
    pub effect: Option<Spread>,
    pub p: Option<Spread>,
    pub q: Option<Spread>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationReport {
    pub rows: Vec<AssociationRow>,
    pub aggregate: Vec<AggregateRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub components: usize,
    pub stratify: StratifyOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            components: DEFAULT_COMPONENTS,
            stratify: StratifyOptions::default(),
        }
    }
}

fn defined(r: Result<Association>) -> Result<Option<Association>> {
    match r {
        Ok(a) => Ok(Some(a)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Global and stratified associations of one embedding matrix's leading components.
pub fn associate_snapshot(
    name: &str,
    data: ndarray::ArrayView2<'_, f64>,
    factors: &ItemFactors,
    options: &SuiteOptions,
) -> Result<Vec<AssociationRow>> {
    if data.nrows() != factors.num_items() {
        return Err(Error::InvalidArgument(format!(
            "snapshot `{name}` has {} items, factors cover {}",
            data.nrows(),
            factors.num_items()
        )));
    }
    let pca = pca_decompose(data)?;
    let components = options.components.min(data.ncols());
    let difficulty = factors.difficulty.as_slice().expect("contiguous");
    let mut rows = Vec::new();
    for k in 0..components {
        let xi: Vec<f64> = pca.scores.column(k).to_vec();
        for mode in [Mode::Global, Mode::Stratified] {
            let mut family: Vec<AssociationRow> = Vec::new();
            for factor in Factor::ALL {
                let values = factor.values(factors);
                let a = match mode {
                    Mode::Global => defined(global_associate(&xi, values))?,
                    Mode::Stratified => defined(stratified_associate(&xi, values, difficulty, &options.stratify))?,
                };
                family.push(AssociationRow {
                    snapshot: name.to_string(),
                    component: k + 1,
                    factor,
                    mode,
                    effect: a.map(|a| a.effect),
                    p: a.map(|a| a.p),
                    q: None,
                });
            }
            let pvals: Vec<f64> = family.iter().filter_map(|r| r.p).collect();
            let mut qvals = bh_fdr(&pvals)?.into_iter();
            for r in family.iter_mut().filter(|r| r.p.is_some()) {
                r.q = qvals.next();
            }
            rows.extend(family);
        }
    }
    Ok(rows)
}

/// Runs every snapshot (one per source model), then aggregates by median and IQR.
pub fn run_association_suite(
    embeddings: &AlignedEmbeddings,
    factors: &ItemFactors,
    options: &SuiteOptions,
) -> Result<AssociationReport> {
    if options.components == 0 {
        return Err(Error::InvalidArgument("at least one component required".into()));
    }
    let per_snapshot: Vec<Vec<AssociationRow>> = (0..embeddings.num_models())
        .into_par_iter()
        .map(|m| associate_snapshot(&embeddings.model_names[m], embeddings.model(m), factors, options))
        .collect::<Result<_>>()?;
    let rows: Vec<AssociationRow> = per_snapshot.into_iter().flatten().collect();
    let aggregate = aggregate_rows(&rows);
    Ok(AssociationReport { rows, aggregate })
}

pub fn aggregate_rows(rows: &[AssociationRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, Factor, Mode)> = rows.iter().map(|r| (r.component, r.factor, r.mode)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(component, factor, mode)| {
            let group: Vec<&AssociationRow> = rows
                .iter()
                .filter(|r| r.component == component && r.factor == factor && r.mode == mode)
                .collect();
            let collect = |f: fn(&AssociationRow) -> Option<f64>| -> Vec<f64> {
                group.iter().filter_map(|r| f(r)).collect()
            };
            AggregateRow {
                component,
                factor,
                mode,
                snapshots: group.len(),
                effect: Spread::of(&collect(|r| r.effect)),
                p: Spread::of(&collect(|r| r.p)),
                q: Spread::of(&collect(|r| r.q)),
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl AssociationReport {
    /// Writes the per-snapshot and aggregate CSVs into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let rows_path = dir.join(ASSOCIATION_CSV);
        let mut w = csv::Writer::from_path(&rows_path).map_err(|e| csv_error(&rows_path, e))?;
        w.write_record(["snapshot", "component", "factor", "mode", "effect", "p", "q"])
            .map_err(|e| csv_error(&rows_path, e))?;
        for r in &self.rows {
            w.write_record([
                r.snapshot.clone(),
                r.component.to_string(),
                r.factor.to_string(),
                r.mode.to_string(),
                cell(r.effect),
                cell(r.p),
                cell(r.q),
            ])
            .map_err(|e| csv_error(&rows_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&rows_path, e))?;

        let agg_path = dir.join(ASSOCIATION_AGGREGATE_CSV);
        let mut w = csv::Writer::from_path(&agg_path).map_err(|e| csv_error(&agg_path, e))?;
        w.write_record([
            "component", "factor", "mode", "snapshots", "effect_median", "effect_iqr", "p_median", "p_iqr",
            "q_median", "q_iqr",
        ])
        .map_err(|e| csv_error(&agg_path, e))?;
        for a in &self.aggregate {
            let parts = |s: Option<Spread>| [cell(s.map(|s| s.median)), cell(s.map(|s| s.iqr))];
            let [em, ei] = parts(a.effect);
            let [pm, pi] = parts(a.p);
            let [qm, qi] = parts(a.q);
            w.write_record([
                a.component.to_string(),
                a.factor.to_string(),
                a.mode.to_string(),
                a.snapshots.to_string(),
                em,
                ei,
                pm,
                pi,
                qm,
                qi,
            ])
            .map_err(|e| csv_error(&agg_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&agg_path, e))?;
        Ok((rows_path, agg_path))
    }
}
