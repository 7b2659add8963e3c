use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Final-token hidden states of one model over every benchmark item.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStates {
    pub name: String,
    /// `num_items x dim`, row-major.
    pub states: Array2<f32>,
}

impl ModelStates {
    pub fn dim(&self) -> usize {
        self.states.ncols()
    }
}

/// Per-model hidden-state matrices sharing one item axis. Widths may differ.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateStore {
    num_items: usize,
    models: Vec<ModelStates>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    num_items: usize,
    models: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    dim: usize,
    file: String,
}

impl HiddenStateStore {
    pub fn new(num_items: usize, models: Vec<ModelStates>) -> Result<Self> {
        let mut seen = HashSet::new();
        for m in &models {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::DuplicateModel(m.name.clone()));
            }
            if m.dim() == 0 {
                return Err(Error::InvalidConfig(format!(
                    "model `{}` has zero hidden width",
                    m.name
                )));
            }
            if m.states.nrows() != num_items {
                return Err(Error::DimensionMismatch {
                    model: m.name.clone(),
                    expected: num_items * m.dim(),
                    found: m.states.len(),
                });
            }
            check_finite(&m.name, &m.states)?;
        }
        Ok(Self { num_items, models })
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn models(&self) -> &[ModelStates] {
        &self.models
    }

    pub fn model_names(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.name.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.models.iter().map(ModelStates::dim).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ModelStates> {
        self.models.iter().find(|m| m.name == name)
    }

    /// Restricts the store to `names`, in the order given.
    pub fn select(&self, names: &[impl AsRef<str>]) -> Result<Self> {
        let models = names
            .iter()
            .map(|n| {
                self.get(n.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::UnknownModel(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            num_items: self.num_items,
            models,
        })
    }

    /// Reads a manifest and the per-model blobs it references (paths relative to the manifest).
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let text =
            fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::format(manifest_path, e.to_string()))?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

        let mut models = Vec::with_capacity(manifest.models.len());
        for entry in manifest.models {
            let blob_path = base.join(&entry.file);
            let bytes = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
            let expected = manifest.num_items * entry.dim;
            if bytes.len() != expected * 4 {
                return Err(Error::DimensionMismatch {
                    model: entry.name,
                    expected,
                    found: bytes.len() / 4,
                });
            }
            let values: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let states = Array2::from_shape_vec((manifest.num_items, entry.dim), values)
                .expect("length checked above");
            models.push(ModelStates {
                name: entry.name,
                states,
            });
        }
        Self::new(manifest.num_items, models)
    }

    /// Writes `manifest_name` plus one `.f32` blob per model into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, manifest_name: &str) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let stem = manifest_name.trim_end_matches(".json");
        let mut entries = Vec::with_capacity(self.models.len());
        for (idx, m) in self.models.iter().enumerate() {
            let file = format!("{stem}.{idx:03}.{}.f32", sanitize(&m.name));
            let mut bytes = Vec::with_capacity(m.states.len() * 4);
            for v in m.states.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            let path = dir.join(&file);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            entries.push(ManifestEntry {
                name: m.name.clone(),
                dim: m.dim(),
                file,
            });
        }
        let manifest = Manifest {
            num_items: self.num_items,
            models: entries,
        };
        let path = dir.join(manifest_name);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn check_finite(model: &str, states: &Array2<f32>) -> Result<()> {
    for ((item, coord), v) in states.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                model: model.to_string(),
                item,
                coord,
            });
        }
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
