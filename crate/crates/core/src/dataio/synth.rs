//! Seeded synthetic benchmark worlds with planted structure.
//!
//! Correctness follows a two-parameter logistic model
//! `P(y = 1) = σ(a_i (θ_m − b_i))`. Each model's hidden state for an item is
//! a random linear image of `[cluster code; b_i; logit_{m,i}]` plus Gaussian
//! noise, so correctness, difficulty and task clusters are all recoverable
//! from the states.

use std::path::Path;

use chrono::{Days, NaiveDate};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{HiddenStateStore, ItemInfo, ItemMeta, ModelInfo, ModelMeta, ModelStates, ResponseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_items: usize,
    pub num_models: usize,
    /// Task clusters; item subtask labels are cluster ids.
    pub num_clusters: usize,
    /// Coarse ability groups; cluster `c` belongs to group `c % num_abilities`.
    pub num_abilities: usize,
    /// Hidden widths, cycled over models.
    pub model_dims: Vec<usize>,
    /// Standard deviation of the additive Gaussian noise on hidden states.
    pub noise_scale: f64,
    /// Item discrimination `a_i ~ U[lo, hi]`.
    pub discrimination: (f64, f64),
    /// Within-cluster spread of item difficulty.
    pub difficulty_sd: f64,
    /// Spread of per-cluster mean difficulty.
    pub cluster_difficulty_sd: f64,
    /// Magnitude of the one-hot cluster code in the latent vector.
    pub cluster_scale: f64,
    pub ability_sd: f64,
    /// Fixed model abilities; overrides sampling when set.
    pub abilities: Option<Vec<f64>>,
    pub num_families: usize,
    /// Use one linear map for every model (requires equal widths).
    pub shared_projection: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_items: 1000,
            num_models: 60,
            num_clusters: 5,
            num_abilities: 2,
            model_dims: vec![48, 64, 96],
            noise_scale: 0.1,
            discrimination: (1.0, 3.0),
            difficulty_sd: 1.0,
            cluster_difficulty_sd: 0.5,
            cluster_scale: 1.0,
            ability_sd: 1.0,
            abilities: None,
            num_families: 4,
            shared_projection: false,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.num_clusters == 0 {
            return fail("num_clusters must be at least 1");
        }
        if self.num_models < 2 {
            return fail("need at least 2 models");
        }
        if self.num_items < self.num_clusters {
            return fail("num_items must be at least num_clusters");
        }
        if self.model_dims.is_empty() || self.model_dims.contains(&0) {
            return fail("model_dims must be nonempty and positive");
        }
        if self.num_abilities == 0 || self.num_families == 0 {
            return fail("num_abilities and num_families must be positive");
        }
        if self.noise_scale < 0.0 || self.difficulty_sd < 0.0 || self.ability_sd < 0.0 {
            return fail("scales must be non-negative");
        }
        let (lo, hi) = self.discrimination;
        if !(lo > 0.0 && hi >= lo) {
            return fail("discrimination range must satisfy 0 < lo <= hi");
        }
        if let Some(a) = &self.abilities {
            if a.len() != self.num_models {
                return fail("abilities length must equal num_models");
            }
        }
        if self.shared_projection && self.model_dims.iter().any(|&d| d != self.model_dims[0]) {
            return fail("shared_projection requires a single hidden width");
        }
        Ok(())
    }
}

/// Generating parameters, kept for oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub ability: Vec<f64>,
    pub difficulty: Vec<f64>,
    pub discrimination: Vec<f64>,
    pub cluster: Vec<usize>,
}

impl SynthTruth {
    pub fn logit(&self, model: usize, item: usize) -> f64 {
        self.discrimination[item] * (self.ability[model] - self.difficulty[item])
    }

    pub fn pass_probability(&self, model: usize, item: usize) -> f64 {
        1.0 / (1.0 + (-self.logit(model, item)).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub store: HiddenStateStore,
    pub responses: ResponseMatrix,
    pub items: ItemMeta,
    pub models: ModelMeta,
    pub truth: SynthTruth,
}

impl SyntheticWorld {
    /// Writes the world in the standard on-disk layout (see [`super::DataDir`]).
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.store.save(dir, super::HIDDEN_MANIFEST)?;
        self.responses.save(dir.join(super::RESPONSES_CSV))?;
        self.items.save(dir.join(super::ITEMS_CSV))?;
        self.models.save(dir.join(super::MODELS_CSV))
    }
}

pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<SyntheticWorld> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.num_items;
    let t = config.num_clusters;
    let num_models = config.num_models;

    let mut cluster: Vec<usize> = (0..n).map(|i| i % t).collect();
    cluster.shuffle(&mut rng);
    let cluster_mean: Vec<f64> = (0..t)
        .map(|_| config.cluster_difficulty_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let difficulty: Vec<f64> = cluster
        .iter()
        .map(|&c| cluster_mean[c] + config.difficulty_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let (lo, hi) = config.discrimination;
    let discrimination: Vec<f64> = (0..n)
        .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
        .collect();
    let ability: Vec<f64> = match &config.abilities {
        Some(a) => a.clone(),
        None => (0..num_models)
            .map(|_| config.ability_sd * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    };
    let truth = SynthTruth {
        ability,
        difficulty,
        discrimination,
        cluster,
    };

    let mut values = Array2::<u8>::zeros((num_models, n));
    for m in 0..num_models {
        for i in 0..n {
            let u: f64 = rng.random();
            values[[m, i]] = u8::from(u < truth.pass_probability(m, i));
        }
    }

    let latent_dim = t + 2;
    let latent = |m: usize, i: usize| {
        let mut v = Array1::<f64>::zeros(latent_dim);
        v[truth.cluster[i]] = config.cluster_scale;
        v[t] = truth.difficulty[i];
        v[t + 1] = truth.logit(m, i);
        v
    };
    let map_scale = 1.0 / (latent_dim as f64).sqrt();
    let random_map = |rng: &mut ChaCha8Rng, d: usize| {
        Array2::from_shape_fn((d, latent_dim), |_| map_scale * rng.sample::<f64, _>(StandardNormal))
    };
    let shared = config
        .shared_projection
        .then(|| random_map(&mut rng, config.model_dims[0]));
    let noise = Normal::new(0.0, config.noise_scale).expect("noise scale validated");

    let mut states = Vec::with_capacity(num_models);
    for m in 0..num_models {
        let d = config.model_dims[m % config.model_dims.len()];
        let map = match &shared {
            Some(r) => r.clone(),
            None => random_map(&mut rng, d),
        };
        let mut h = Array2::<f32>::zeros((n, d));
        for i in 0..n {
            let projected = map.dot(&latent(m, i));
            for (j, v) in projected.iter().enumerate() {
                let eps = if config.noise_scale > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                h[[i, j]] = (v + eps) as f32;
            }
        }
        states.push(ModelStates {
            name: model_name(m),
            states: h,
        });
    }
    let store = HiddenStateStore::new(n, states)?;
    let model_names: Vec<String> = (0..num_models).map(model_name).collect();
    let responses = ResponseMatrix::new(model_names.clone(), values)?;

    let items = ItemMeta::new(
        (0..n)
            .map(|i| ItemInfo {
                item_id: format!("i{i}"),
                subtask: Some(format!("task{}", truth.cluster[i])),
                ability: Some(format!("ability{}", truth.cluster[i] % config.num_abilities)),
            })
            .collect(),
    )?;

    // Release order tracks ability loosely: newer models tend to be stronger.
    let release_key: Vec<f64> = truth
        .ability
        .iter()
        .map(|a| a + 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut order: Vec<usize> = (0..num_models).collect();
    order.sort_by(|&a, &b| release_key[a].total_cmp(&release_key[b]).then(a.cmp(&b)));
    let mut release_rank = vec![0u64; num_models];
    for (rank, &m) in order.iter().enumerate() {
        release_rank[m] = rank as u64;
    }
    let epoch = NaiveDate::from_ymd_opt(2022, 1, 1).expect("valid date");
    let models = ModelMeta::new(
        (0..num_models)
            .map(|m| ModelInfo {
                name: model_name(m),
                family: Some(format!("fam{}", m % config.num_families)),
                release_date: epoch.checked_add_days(Days::new(14 * release_rank[m])),
                overall_score: Some(responses.accuracy(m)),
            })
            .collect(),
    )?;

    Ok(SyntheticWorld {
        store,
        responses,
        items,
        models,
        truth,
    })
}

fn model_name(m: usize) -> String {
    format!("model{m:03}")
}
