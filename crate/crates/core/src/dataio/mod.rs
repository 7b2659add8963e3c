//! Persistent data types, their file formats, and synthetic worlds.
//!
//! A data directory holds:
//!
//! * `hidden_states.json`: manifest `{"num_items", "models": [{"name", "dim", "file"}]}`
//!   with one row-major little-endian `f32` blob per model,
//! * `responses.csv`: `model,i0,i1,...` with 0/1 cells,
//! * `items.csv`: `item_id,subtask,ability`,
//! * `models.csv`: `name,family,release_date,overall_score`.

mod hidden;
mod meta;
mod responses;
mod split;
mod synth;

use std::path::{Path, PathBuf};

pub use hidden::{HiddenStateStore, ModelStates};
pub use meta::{ItemInfo, ItemMeta, ModelInfo, ModelMeta};
pub use responses::ResponseMatrix;
pub(crate) use responses::csv_error;
pub use split::{split_items, ItemSplit};
pub use synth::{generate_synthetic, SynthConfig, SynthTruth, SyntheticWorld};

use crate::error::{Error, Result};

pub const HIDDEN_MANIFEST: &str = "hidden_states.json";
pub const RESPONSES_CSV: &str = "responses.csv";
pub const ITEMS_CSV: &str = "items.csv";
pub const MODELS_CSV: &str = "models.csv";

pub fn load_hidden_store(manifest_path: impl AsRef<Path>) -> Result<HiddenStateStore> {
    HiddenStateStore::load(manifest_path)
}

pub fn load_response_matrix(path: impl AsRef<Path>) -> Result<ResponseMatrix> {
    ResponseMatrix::load(path)
}

/// Everything in a data directory, cross-validated.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub store: HiddenStateStore,
    pub responses: ResponseMatrix,
    pub items: ItemMeta,
    pub models: ModelMeta,
}

impl Dataset {
    /// Loads the standard layout. Item and model metadata are optional files.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let store = HiddenStateStore::load(dir.join(HIDDEN_MANIFEST))?;
        let responses = ResponseMatrix::load(dir.join(RESPONSES_CSV))?;
        if responses.num_items() != store.num_items() {
            return Err(Error::format(
                dir.join(RESPONSES_CSV),
                format!(
                    "{} items, hidden states have {}",
                    responses.num_items(),
                    store.num_items()
                ),
            ));
        }
        for name in store.model_names() {
            if responses.index_of(name).is_none() {
                return Err(Error::UnknownModel(format!("{name} (hidden states without responses)")));
            }
        }
        let items = match existing(dir.join(ITEMS_CSV)) {
            Some(p) => ItemMeta::load(p)?,
            None => ItemMeta::anonymous(store.num_items()),
        };
        items.check_len(store.num_items())?;
        let models = match existing(dir.join(MODELS_CSV)) {
            Some(p) => {
                let m = ModelMeta::load(p)?;
                m.validate_against(&responses)?;
                m
            }
            None => ModelMeta::new(
                responses
                    .model_names()
                    .iter()
                    .enumerate()
                    .map(|(k, name)| ModelInfo {
                        name: name.clone(),
                        family: None,
                        release_date: None,
                        overall_score: Some(responses.accuracy(k)),
                    })
                    .collect(),
            )?,
        };
        Ok(Self {
            store,
            responses,
            items,
            models,
        })
    }
}

impl From<SyntheticWorld> for Dataset {
    fn from(w: SyntheticWorld) -> Self {
        Self {
            store: w.store,
            responses: w.responses,
            items: w.items,
            models: w.models,
        }
    }
}

fn existing(p: PathBuf) -> Option<PathBuf> {
    p.exists().then_some(p)
}
