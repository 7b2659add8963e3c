use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{init_network, AlignmentNetwork, Example, InputNorm};
use super::{auc, EMBED_DIM};
use crate::dataio::{HiddenStateStore, ItemSplit, ResponseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Width every projection maps into.
    pub hidden_width: usize,
    /// Shared MLP layer widths; the last one is the embedding width.
    pub mlp_widths: Vec<usize>,
    pub weight_init_scale: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Standardize each hidden coordinate over the training items before projection.
    pub standardize_inputs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 256,
            hidden_width: 256,
            mlp_widths: vec![128, EMBED_DIM],
            weight_init_scale: 1.0,
            early_stop_patience: 5,
            seed: 0,
            standardize_inputs: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.hidden_width == 0 || self.early_stop_patience == 0 {
            return bad("batch_size, hidden_width and early_stop_patience must be positive");
        }
        if !(self.weight_init_scale > 0.0) {
            return bad("weight_init_scale must be positive");
        }
        if self.mlp_widths.contains(&0) {
            return bad("mlp widths must be positive");
        }
        if self.mlp_widths.last() != Some(&EMBED_DIM) {
            return bad("mlp_widths must end at the embedding width 32");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-example cross-entropy of each completed epoch.
    pub epoch_losses: Vec<f64>,
    /// Validation AUC of the kept snapshot; `None` when the validation split
    /// is empty or single-class.
    pub best_val_auc: Option<f64>,
    pub test_auc: Option<f64>,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

/// Adam with bias correction.
pub(crate) struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub(crate) fn new(net: &AlignmentNetwork, lr: f64) -> Self {
        let shapes: Vec<Vec<f64>> = net.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    /// Applies one update using `grad · scale`.
    pub(crate) fn step(&mut self, net: &mut AlignmentNetwork, grad: &AlignmentNetwork, scale: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in net
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for k in 0..p.len() {
                let gk = g[k] * scale;
                m[k] = b1 * m[k] + (1.0 - b1) * gk;
                v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
    }
}

/// Standardized `f64` copy of each model's states.
pub(crate) fn prepare_inputs(
    store: &HiddenStateStore,
    norms: Option<&[InputNorm]>,
) -> Vec<Array2<f64>> {
    store
        .models()
        .iter()
        .enumerate()
        .map(|(m, ms)| {
            let mut x = ms.states.mapv(f64::from);
            if let Some(norms) = norms {
                let n = &norms[m];
                for mut row in x.rows_mut() {
                    row -= &n.shift;
                    row *= &n.scale;
                }
            }
            x
        })
        .collect()
}

fn fit_norms(store: &HiddenStateStore, items: &[usize]) -> Vec<InputNorm> {
    store
        .models()
        .iter()
        .map(|ms| {
            let x = ms.states.select(Axis(0), items).mapv(f64::from);
            let shift = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(ms.dim()));
            let sd = x.std_axis(Axis(0), 0.0);
            let scale = sd.mapv(|s| if s > 1e-12 { 1.0 / s } else { 1.0 });
            InputNorm { shift, scale }
        })
        .collect()
}

fn pair_auc(
    net: &AlignmentNetwork,
    inputs: &[Array2<f64>],
    labels: &[Vec<u8>],
    items: &[usize],
) -> Result<Option<f64>> {
    let mut batch = Vec::with_capacity(items.len() * inputs.len());
    for (m, x) in inputs.iter().enumerate() {
        for &i in items {
            batch.push(Example {
                model: m,
                state: x.row(i).to_slice().expect("standard layout"),
                label: labels[m][i],
            });
        }
    }
    let mut scores = Vec::with_capacity(batch.len());
    for chunk in batch.chunks(4096) {
        scores.extend(net.scores(chunk)?);
    }
    let ys: Vec<u8> = batch.iter().map(|e| e.label).collect();
    Ok(auc(&scores, &ys).ok())
}

/// Trains on every (source model, training item) pair with minibatch Adam and
/// keeps the snapshot with the best validation AUC.
pub fn train_alignment(
    store: &HiddenStateStore,
    responses: &ResponseMatrix,
    split: &ItemSplit,
    config: &TrainConfig,
) -> Result<(AlignmentNetwork, TrainReport)> {
    config.validate()?;
    if split.num_items() != store.num_items()
        || split.train.iter().chain(&split.val).chain(&split.test).any(|&i| i >= store.num_items())
    {
        return Err(Error::InvalidArgument(format!(
            "split covers {} items, store has {}",
            split.num_items(),
            store.num_items()
        )));
    }
    if split.train.is_empty() {
        return Err(Error::EmptySplit);
    }
    let labels: Vec<Vec<u8>> = store
        .model_names()
        .iter()
        .map(|name| responses.row_by_name(name).map(|r| r.to_vec()))
        .collect::<Result<_>>()?;
    if responses.num_items() != store.num_items() {
        return Err(Error::InvalidArgument(
            "responses and hidden states disagree on item count".into(),
        ));
    }

    let mut net = init_network(&store.dims(), config)?;
    net.model_names = store.model_names().iter().map(|s| s.to_string()).collect();
    if config.standardize_inputs {
        net.input_norms = Some(fit_norms(store, &split.train));
    }
    let inputs = prepare_inputs(store, net.input_norms.as_deref());

    let mut pairs: Vec<(usize, usize)> = (0..inputs.len())
        .flat_map(|m| split.train.iter().map(move |&i| (m, i)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_7a1e);
    let mut adam = Adam::new(&net, config.learning_rate);

    let mut best = net.clone();
    let mut best_val = pair_auc(&net, &inputs, &labels, &split.val)?;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epoch_losses = Vec::new();

    for epoch in 1..=config.epochs {
        pairs.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in pairs.chunks(config.batch_size) {
            let batch: Vec<Example<'_>> = chunk
                .iter()
                .map(|&(m, i)| Example {
                    model: m,
                    state: inputs[m].row(i).to_slice().expect("standard layout"),
                    label: labels[m][i],
                })
                .collect();
            let (loss, grad) = net.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            total += loss;
            adam.step(&mut net, &grad, 1.0 / batch.len() as f64);
        }
        if !net.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        epoch_losses.push(total / pairs.len() as f64);

        match (pair_auc(&net, &inputs, &labels, &split.val)?, best_val) {
            (Some(v), Some(b)) if v <= b => {
                stale += 1;
                if stale >= config.early_stop_patience {
                    break;
                }
            }
            (Some(v), _) => {
                best_val = Some(v);
                best = net.clone();
                best_epoch = epoch;
                stale = 0;
            }
            (None, _) => {
                // no usable validation signal: keep the latest parameters
                best = net.clone();
                best_epoch = epoch;
            }
        }
    }

    let test_auc = pair_auc(&best, &inputs, &labels, &split.test)?;
    let report = TrainReport {
        epochs_run: epoch_losses.len(),
        epoch_losses,
        best_val_auc: best_val,
        test_auc,
        best_epoch,
    };
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, split_items, SynthConfig};

    fn tiny_world() -> crate::dataio::SyntheticWorld {
        generate_synthetic(
            &SynthConfig {
                num_items: 120,
                num_models: 4,
                model_dims: vec![6, 9],
                ..SynthConfig::default()
            },
            11,
        )
        .unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            hidden_width: 16,
            mlp_widths: vec![16, 32],
            batch_size: 64,
            epochs: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_network() {
        let w = tiny_world();
        let split = split_items(120, (0.7, 0.1, 0.2), 0).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..small_cfg()
        };
        let (net, report) = train_alignment(&w.store, &w.responses, &split, &cfg).unwrap();
        assert_eq!(report.epochs_run, 0);
        let mut init = init_network(&w.store.dims(), &cfg).unwrap();
        init.model_names = net.model_names.clone();
        init.input_norms = net.input_norms.clone();
        assert_eq!(net, init);
    }

    #[test]
    fn training_is_deterministic() {
        let w = tiny_world();
        let split = split_items(120, (0.7, 0.1, 0.2), 1).unwrap();
        let a = train_alignment(&w.store, &w.responses, &split, &small_cfg()).unwrap();
        let b = train_alignment(&w.store, &w.responses, &split, &small_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_batch_loss_decreases_at_small_lr() {
        let w = tiny_world();
        let split = split_items(120, (0.7, 0.1, 0.2), 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-4,
            batch_size: 10_000,
            epochs: 30,
            early_stop_patience: 1000,
            ..small_cfg()
        };
        let (_, report) = train_alignment(&w.store, &w.responses, &split, &cfg).unwrap();
        assert_eq!(report.epochs_run, 30);
        for pair in report.epoch_losses.windows(2) {
            assert!(pair[1] <= pair[0], "{:?}", report.epoch_losses);
        }
    }

    #[test]
    fn empty_train_split_is_an_error() {
        let w = tiny_world();
        let split = ItemSplit {
            train: vec![],
            val: (0..60).collect(),
            test: (60..120).collect(),
        };
        assert!(matches!(
            train_alignment(&w.store, &w.responses, &split, &small_cfg()),
            Err(Error::EmptySplit)
        ));
    }

    #[test]
    fn config_must_end_at_embedding_width() {
        let cfg = TrainConfig {
            mlp_widths: vec![64, 16],
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }
}
