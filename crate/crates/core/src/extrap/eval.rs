use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{mae, spearman};
use crate::dataio::csv_error;
use crate::error::{Error, Result};

/// Estimated and true accuracy for one target model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEval {
    pub model: String,
    pub estimated: f64,
    pub truth: f64,
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub num_targets: usize,
    /// `None` when either side has no rank variance.
    pub spearman_rho: Option<f64>,
    pub mae: f64,
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub targets: Vec<TargetEval>,
    pub summary: EvalSummary,
}

impl EvalResult {
    pub fn from_targets(targets: Vec<TargetEval>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidArgument("no targets to evaluate".into()));
        }
        let est: Vec<f64> = targets.iter().map(|t| t.estimated).collect();
        let truth: Vec<f64> = targets.iter().map(|t| t.truth).collect();
        let spearman_rho = match spearman(&est, &truth) {
            Ok(r) => Some(r),
            Err(Error::Undefined(_)) => None,
            // a single target
            Err(Error::InvalidArgument(_)) => None,
            Err(e) => return Err(e),
        };
        let agree: Vec<f64> = targets.iter().filter_map(|t| t.agreement).collect();
        let agreement = (agree.len() == targets.len())
            .then(|| agree.iter().sum::<f64>() / agree.len() as f64);
        let summary = EvalSummary {
            num_targets: targets.len(),
            spearman_rho,
            mae: mae(&est, &truth)?,
            agreement,
        };
        Ok(EvalResult { targets, summary })
    }

    /// Per-target CSV: `model,estimated,truth,agreement`.
    pub fn save_targets(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["model", "estimated", "truth", "agreement"])
            .map_err(|e| csv_error(path, e))?;
        for t in &self.targets {
            let agreement = t.agreement.map(|a| a.to_string()).unwrap_or_default();
            w.write_record([
                t.model.clone(),
                t.estimated.to_string(),
                t.truth.to_string(),
                agreement,
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_targets(path: impl AsRef<Path>) -> Result<Vec<TargetEval>> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::format(path, format!("bad number in column {k}")))
            };
            let agreement = match rec.get(3) {
                Some("") | None => None,
                Some(_) => Some(num(3)?),
            };
            out.push(TargetEval {
                model: rec.get(0).unwrap_or_default().to_string(),
                estimated: num(1)?,
                truth: num(2)?,
                agreement,
            });
        }
        Ok(out)
    }

    pub fn save_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.summary).expect("serializable");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(model: &str, estimated: f64, truth: f64, agreement: Option<f64>) -> TargetEval {
        TargetEval {
            model: model.into(),
            estimated,
            truth,
            agreement,
        }
    }

    #[test]
    fn aggregates() {
        let r = EvalResult::from_targets(vec![
            t("a", 0.5, 0.4, Some(0.8)),
            t("b", 0.5, 0.8, Some(0.6)),
            t("c", 0.9, 0.9, Some(0.7)),
        ])
        .unwrap();
        assert!((r.summary.mae - 0.4 / 3.0).abs() < 1e-15);
        assert!((r.summary.agreement.unwrap() - 0.7).abs() < 1e-15);
        assert!(r.summary.spearman_rho.unwrap() > 0.0);

        let flat = EvalResult::from_targets(vec![t("a", 0.5, 0.4, None), t("b", 0.5, 0.8, None)]).unwrap();
        assert_eq!(flat.summary.spearman_rho, None);
        assert_eq!(flat.summary.agreement, None);
        assert!(EvalResult::from_targets(vec![]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let r = EvalResult::from_targets(vec![
            t("a", 0.123456789, 0.4, None),
            t("b", 1.0 / 3.0, 0.8, Some(0.25)),
        ])
        .unwrap();
        let p = dir.path().join("targets.csv");
        r.save_targets(&p).unwrap();
        assert_eq!(EvalResult::load_targets(&p).unwrap(), r.targets);
        r.save_summary(dir.path().join("summary.json")).unwrap();
    }
}
