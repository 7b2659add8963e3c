use std::collections::HashSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::responses::{csv_error, ResponseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemInfo {
    pub item_id: String,
    pub subtask: Option<String>,
    pub ability: Option<String>,
}

/// Per-item identifiers and categorical labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ItemMeta {
    pub items: Vec<ItemInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub family: Option<String>,
    pub release_date: Option<NaiveDate>,
    pub overall_score: Option<f64>,
}

/// Per-model metadata used by the source-selection policies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelMeta {
    pub models: Vec<ModelInfo>,
}

fn opt(cell: &str) -> Option<String> {
    let cell = cell.trim();
    (!cell.is_empty()).then(|| cell.to_string())
}

impl ItemMeta {
    pub fn new(items: Vec<ItemInfo>) -> Result<Self> {
        let mut seen = HashSet::new();
        for it in &items {
            if !seen.insert(it.item_id.as_str()) {
                return Err(Error::DuplicateItem(it.item_id.clone()));
            }
        }
        Ok(Self { items })
    }

    /// Placeholder ids `i0..` with no labels.
    pub fn anonymous(num_items: usize) -> Self {
        Self {
            items: (0..num_items)
                .map(|i| ItemInfo {
                    item_id: format!("i{i}"),
                    subtask: None,
                    ability: None,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn check_len(&self, num_items: usize) -> Result<()> {
        if self.items.len() != num_items {
            return Err(Error::InvalidArgument(format!(
                "item metadata has {} rows, benchmark has {num_items} items",
                self.items.len()
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        check_header(path, &mut reader, &["item_id", "subtask", "ability"])?;
        let mut items = Vec::new();
        for record in reader.records() {
            let r = record.map_err(|e| csv_error(path, e))?;
            items.push(ItemInfo {
                item_id: r[0].to_string(),
                subtask: opt(&r[1]),
                ability: opt(&r[2]),
            });
        }
        Self::new(items)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["item_id", "subtask", "ability"])
            .map_err(|e| csv_error(path, e))?;
        for it in &self.items {
            w.write_record([
                it.item_id.as_str(),
                it.subtask.as_deref().unwrap_or(""),
                it.ability.as_deref().unwrap_or(""),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl ModelMeta {
    pub fn new(models: Vec<ModelInfo>) -> Result<Self> {
        let mut seen = HashSet::new();
        for m in &models {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::DuplicateModel(m.name.clone()));
            }
            if let Some(s) = m.overall_score {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::InvalidArgument(format!(
                        "model `{}`: overall_score {s} outside [0, 1]",
                        m.name
                    )));
                }
            }
        }
        Ok(Self { models })
    }

    pub fn get(&self, name: &str) -> Option<&ModelInfo> {
        self.models.iter().find(|m| m.name == name)
    }

    /// Every response row must have a metadata row and vice versa.
    pub fn validate_against(&self, responses: &ResponseMatrix) -> Result<()> {
        let meta: HashSet<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        let rows: HashSet<&str> = responses.model_names().iter().map(String::as_str).collect();
        if let Some(missing) = rows.difference(&meta).min() {
            return Err(Error::UnknownModel(format!("{missing} (no metadata row)")));
        }
        if let Some(extra) = meta.difference(&rows).min() {
            return Err(Error::UnknownModel(format!("{extra} (no response row)")));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        check_header(
            path,
            &mut reader,
            &["name", "family", "release_date", "overall_score"],
        )?;
        let mut models = Vec::new();
        for record in reader.records() {
            let r = record.map_err(|e| csv_error(path, e))?;
            let release_date = opt(&r[2])
                .map(|d| {
                    NaiveDate::parse_from_str(&d, "%Y-%m-%d")
                        .map_err(|e| Error::format(path, format!("release_date `{d}`: {e}")))
                })
                .transpose()?;
            let overall_score = opt(&r[3])
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::format(path, format!("overall_score `{s}`: {e}")))
                })
                .transpose()?;
            models.push(ModelInfo {
                name: r[0].to_string(),
                family: opt(&r[1]),
                release_date,
                overall_score,
            });
        }
        Self::new(models)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["name", "family", "release_date", "overall_score"])
            .map_err(|e| csv_error(path, e))?;
        for m in &self.models {
            let date = m
                .release_date
                .map(|d| d.format("%Y-%m-%d").to_string())
                .unwrap_or_default();
            let score = m.overall_score.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([
                m.name.as_str(),
                m.family.as_deref().unwrap_or(""),
                &date,
                &score,
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn check_header<R: std::io::Read>(
    path: &Path,
    reader: &mut csv::Reader<R>,
    expected: &[&str],
) -> Result<()> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::format(
            path,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(())
}
