use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::stages::{prepare_repeat, run_cell};
use crate::coreset::SelectionMethod;
use crate::dataio::{csv_error, Dataset};
use crate::error::{Error, Result, StageExt};
use crate::extrap::TargetEval;
use crate::stats::{mean, sample_std};

pub const CELLS_CSV: &str = "cells.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const EXPERIMENT_TARGETS_CSV: &str = "cell_targets.csv";

/// Metrics of one (selector, K, repeat) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub selector: SelectionMethod,
    pub k: usize,
    pub repeat: usize,
    pub spearman: Option<f64>,
    pub mae: f64,
    pub agreement: Option<f64>,
}

/// Mean and sample standard deviation over repeats; ρ and agreement skip undefined cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub selector: SelectionMethod,
    pub k: usize,
    pub repeats: usize,
    pub spearman_mean: Option<f64>,
    pub spearman_std: Option<f64>,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub agreement_mean: Option<f64>,
    pub agreement_std: Option<f64>,
}

/// A per-target estimate tagged with its cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetRow {
    pub selector: SelectionMethod,
    pub k: usize,
    pub repeat: usize,
    pub target: TargetEval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<CellRow>,
    pub aggregates: Vec<CellAggregate>,
    pub targets: Vec<TargetRow>,
}

impl ResultTable {
    pub fn aggregate(&self, selector: SelectionMethod, k: usize) -> Option<&CellAggregate> {
        self.aggregates.iter().find(|a| a.selector == selector && a.k == k)
    }

    /// Per-repeat rows of one cell, in repeat order.
    pub fn cell(&self, selector: SelectionMethod, k: usize) -> Vec<&CellRow> {
        self.rows.iter().filter(|r| r.selector == selector && r.k == k).collect()
    }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        (None, None)
    } else {
        (Some(mean(values)), Some(sample_std(values)))
    }
}

pub fn aggregate_cells(rows: &[CellRow], selectors: &[SelectionMethod], budgets: &[usize]) -> Vec<CellAggregate> {
    let mut out = Vec::new();
    for &selector in selectors {
        for &k in budgets {
            let cell: Vec<&CellRow> = rows.iter().filter(|r| r.selector == selector && r.k == k).collect();
            if cell.is_empty() {
                continue;
            }
            let rho: Vec<f64> = cell.iter().filter_map(|r| r.spearman).collect();
            let mae: Vec<f64> = cell.iter().map(|r| r.mae).collect();
            let agree: Vec<f64> = cell.iter().filter_map(|r| r.agreement).collect();
            let (spearman_mean, spearman_std) = mean_std(&rho);
            let (agreement_mean, agreement_std) = mean_std(&agree);
            out.push(CellAggregate {
                selector,
                k,
                repeats: cell.len(),
                spearman_mean,
                spearman_std,
                mae_mean: mean(&mae),
                mae_std: sample_std(&mae),
                agreement_mean,
                agreement_std,
            });
        }
    }
    out
}

/// Runs every (selector, K) cell for each repeat; repeat `r` uses seed `config.seed + r`.
pub fn run_experiment(data: &Dataset, config: &ExperimentConfig) -> Result<ResultTable> {
    config
        .validate_for(data.responses.num_models(), data.responses.num_items())
        .stage("config")?;
    let per_repeat: Vec<(Vec<CellRow>, Vec<TargetRow>)> = (0..config.repeats)
        .into_par_iter()
        .map(|r| -> Result<_> {
            let seed = config.seed.wrapping_add(r as u64);
            let state = prepare_repeat(data, config, &config.selectors, seed)
                .map_err(|e| e.with_context(format!("repeat {r}")))?;
            let mut rows = Vec::new();
            let mut targets = Vec::new();
            for &selector in &config.selectors {
                for &k in &config.budgets {
                    let cell = run_cell(data, &state, config, selector, k)
                        .map_err(|e| e.with_context(format!("repeat {r}, selector {selector}, K={k}")))?;
                    rows.push(CellRow {
                        selector,
                        k,
                        repeat: r,
                        spearman: cell.eval.summary.spearman_rho,
                        mae: cell.eval.summary.mae,
                        agreement: cell.eval.summary.agreement,
                    });
                    targets.extend(cell.eval.targets.into_iter().map(|target| TargetRow {
                        selector,
                        k,
                        repeat: r,
                        target,
                    }));
                }
            }
            Ok((rows, targets))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (r, t) in per_repeat {
        rows.extend(r);
        targets.extend(t);
    }
    // selector-major, then K, then repeat
    let order = |s: SelectionMethod| config.selectors.iter().position(|&x| x == s);
    let budget = |k: usize| config.budgets.iter().position(|&x| x == k);
    rows.sort_by_key(|r| (order(r.selector), budget(r.k), r.repeat));
    targets.sort_by_key(|t| (order(t.selector), budget(t.k), t.repeat));
    let aggregates = aggregate_cells(&rows, &config.selectors, &config.budgets);
    Ok(ResultTable {
        rows,
        aggregates,
        targets,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `records` to `path` through a temporary file in the same directory.
fn write_csv_atomic(path: &Path, header: &[&str], records: Vec<Vec<String>>) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp).map_err(|e| csv_error(&tmp, e))?;
        w.write_record(header).map_err(|e| csv_error(&tmp, e))?;
        for r in records {
            w.write_record(&r).map_err(|e| csv_error(&tmp, e))?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes `cells.csv`, `aggregate.csv` and `targets.csv` into `out_dir`.
pub fn emit_reports(table: &ResultTable, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    if table.rows.is_empty() {
        return Err(Error::InvalidArgument("empty result table".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let cells = dir.join(CELLS_CSV);
    write_csv_atomic(
        &cells,
        &["selector", "K", "repeat", "spearman", "mae", "agreement"],
        table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.selector.to_string(),
                    r.k.to_string(),
                    r.repeat.to_string(),
                    cell(r.spearman),
                    r.mae.to_string(),
                    cell(r.agreement),
                ]
            })
            .collect(),
    )?;

    let aggregate = dir.join(AGGREGATE_CSV);
    write_csv_atomic(
        &aggregate,
        &[
            "selector", "K", "repeats", "spearman_mean", "spearman_std", "mae_mean", "mae_std",
            "agreement_mean", "agreement_std",
        ],
        table
            .aggregates
            .iter()
            .map(|a| {
                vec![
                    a.selector.to_string(),
                    a.k.to_string(),
                    a.repeats.to_string(),
                    cell(a.spearman_mean),
                    cell(a.spearman_std),
                    a.mae_mean.to_string(),
                    a.mae_std.to_string(),
                    cell(a.agreement_mean),
                    cell(a.agreement_std),
                ]
            })
            .collect(),
    )?;

    let targets = dir.join(EXPERIMENT_TARGETS_CSV);
    write_csv_atomic(
        &targets,
        &["selector", "K", "repeat", "model", "estimated", "truth", "agreement"],
        table
            .targets
            .iter()
            .map(|t| {
                vec![
                    t.selector.to_string(),
                    t.k.to_string(),
                    t.repeat.to_string(),
                    t.target.model.clone(),
                    t.target.estimated.to_string(),
                    t.target.truth.to_string(),
                    cell(t.target.agreement),
                ]
            })
            .collect(),
    )?;
    Ok(vec![cells, aggregate, targets])
}

/// Reads back a `cells.csv` written by [`emit_reports`].
pub fn load_cells(path: impl AsRef<Path>) -> Result<Vec<CellRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let field = |k: usize| rec.get(k).unwrap_or_default();
        let bad = |k: usize| Error::format(path, format!("bad value `{}` in column {k}", field(k)));
        let opt = |k: usize| -> Result<Option<f64>> {
            match field(k) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(k)),
            }
        };
        out.push(CellRow {
            selector: field(0).parse()?,
            k: field(1).parse().map_err(|_| bad(1))?,
            repeat: field(2).parse().map_err(|_| bad(2))?,
            spearman: opt(3)?,
            mae: field(4).parse().map_err(|_| bad(4))?,
            agreement: opt(5)?,
        });
    }
    Ok(out)
}
