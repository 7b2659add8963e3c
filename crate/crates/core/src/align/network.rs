use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainConfig;
use crate::error::{Error, Result};

/// Affine map `x ↦ x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    fn uniform(input: usize, output: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let bound = scale / (input as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((input, output), |_| rng.random_range(-bound..=bound)),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

/// Fixed per-coordinate standardization `(x − shift) · scale` applied to raw
/// hidden states before projection. Not trained.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub shift: Array1<f64>,
    pub scale: Array1<f64>,
}

impl InputNorm {
    pub fn apply(&self, x: ArrayView1<'_, f32>, out: &mut [f64]) {
        for (k, v) in x.iter().enumerate() {
            out[k] = (f64::from(*v) - self.shift[k]) * self.scale[k];
        }
    }
}

/// Per-model projections into a shared width, a shared ReLU MLP ending in the
/// embedding layer, and a two-way linear classifier on the embedding.
///
/// ReLU follows the projection and every MLP layer except the last; the
/// embedding itself is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentNetwork {
    pub model_names: Vec<String>,
    pub projections: Vec<Linear>,
    pub mlp: Vec<Linear>,
    pub classifier: Linear,
    pub input_norms: Option<Vec<InputNorm>>,
}

/// One supervised example: hidden state of `model` on some item and its label.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub model: usize,
    pub state: &'a [f64],
    pub label: u8,
}

pub fn init_network(store_dims: &[usize], config: &TrainConfig) -> Result<AlignmentNetwork> {
    config.validate()?;
    if store_dims.is_empty() {
        return Err(Error::InvalidArgument("no source models".into()));
    }
    if store_dims.contains(&0) {
        return Err(Error::InvalidArgument("zero hidden width".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = config.weight_init_scale;
    let projections = store_dims
        .iter()
        .map(|&d| Linear::uniform(d, config.hidden_width, scale, &mut rng))
        .collect();
    let mut mlp = Vec::with_capacity(config.mlp_widths.len());
    let mut width = config.hidden_width;
    for &w in &config.mlp_widths {
        mlp.push(Linear::uniform(width, w, scale, &mut rng));
        width = w;
    }
    let classifier = Linear::uniform(width, 2, scale, &mut rng);
    Ok(AlignmentNetwork {
        model_names: (0..store_dims.len()).map(|m| format!("source{m}")).collect(),
        projections,
        mlp,
        classifier,
        input_norms: None,
    })
}

/// Activations kept for the backward pass.
struct Trace {
    /// `(model, first row, standardized inputs)` per contiguous model group.
    groups: Vec<(usize, usize, Array2<f64>)>,
    /// Projected rows (pre-ReLU), grouped by model.
    proj_pre: Array2<f64>,
    /// Input to each MLP layer, then the embedding as the last entry.
    acts: Vec<Array2<f64>>,
    /// Pre-activation of each MLP layer.
    pre: Vec<Array2<f64>>,
    logits: Array2<f64>,
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

impl AlignmentNetwork {
    pub fn num_models(&self) -> usize {
        self.projections.len()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.projections.iter().map(Linear::input_dim).collect()
    }

    pub fn hidden_width(&self) -> usize {
        self.projections[0].output_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.mlp
            .last()
            .map(Linear::output_dim)
            .unwrap_or_else(|| self.hidden_width())
    }

    pub fn zeros_like(&self) -> Self {
        let z = |l: &Linear| Linear::zeros(l.input_dim(), l.output_dim());
        Self {
            model_names: self.model_names.clone(),
            projections: self.projections.iter().map(z).collect(),
            mlp: self.mlp.iter().map(z).collect(),
            classifier: z(&self.classifier),
            input_norms: None,
        }
    }

    fn layers(&self) -> impl Iterator<Item = &Linear> {
        self.projections
            .iter()
            .chain(&self.mlp)
            .chain(std::iter::once(&self.classifier))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Linear> {
        self.projections
            .iter_mut()
            .chain(&mut self.mlp)
            .chain(std::iter::once(&mut self.classifier))
    }

    /// Trainable tensors in a fixed order: projections, MLP, classifier; weight before bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Runs the batch in model-grouped order; returns the trace and the
    /// permutation from trace rows to batch positions.
    fn forward(&self, batch: &[Example<'_>]) -> Result<(Trace, Vec<usize>)> {
        let width = self.hidden_width();
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.sort_by_key(|&k| (batch[k].model, k));
        let mut proj_pre = Array2::<f64>::zeros((batch.len(), width));
        let mut groups = Vec::new();

        let mut start = 0;
        while start < order.len() {
            let model = batch[order[start]].model;
            let mut end = start;
            while end < order.len() && batch[order[end]].model == model {
                end += 1;
            }
            let layer = self.projections.get(model).ok_or_else(|| {
                Error::InvalidArgument(format!("example refers to unknown model {model}"))
            })?;
            let d = layer.input_dim();
            let mut x = Array2::<f64>::zeros((end - start, d));
            for (r, &k) in order[start..end].iter().enumerate() {
                let state = batch[k].state;
                if state.len() != d {
                    return Err(Error::DimensionMismatch {
                        model: self.model_names[model].clone(),
                        expected: d,
                        found: state.len(),
                    });
                }
                x.row_mut(r).assign(&ArrayView1::from(state));
            }
            proj_pre
                .slice_mut(s![start..end, ..])
                .assign(&layer.apply(&x));
            groups.push((model, start, x));
            start = end;
        }

        let mut acts = vec![relu(&proj_pre)];
        let mut pre = Vec::with_capacity(self.mlp.len());
        for (l, layer) in self.mlp.iter().enumerate() {
            let z = layer.apply(acts.last().expect("nonempty"));
            let a = if l + 1 < self.mlp.len() { relu(&z) } else { z.clone() };
            pre.push(z);
            acts.push(a);
        }
        let logits = self.classifier.apply(acts.last().expect("nonempty"));
        Ok((
            Trace {
                groups,
                proj_pre,
                acts,
                pre,
                logits,
            },
            order,
        ))
    }

    /// Summed cross-entropy over the batch and its exact gradient.
    pub fn loss_and_grad(&self, batch: &[Example<'_>]) -> Result<(f64, AlignmentNetwork)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let (trace, order) = self.forward(batch)?;
        let b = batch.len();

        let mut loss = 0.0;
        let mut dlogits = Array2::<f64>::zeros((b, 2));
        for r in 0..b {
            let label = batch[order[r]].label as usize;
            let (l0, l1) = (trace.logits[[r, 0]], trace.logits[[r, 1]]);
            let mx = l0.max(l1);
            let lse = mx + ((l0 - mx).exp() + (l1 - mx).exp()).ln();
            loss += lse - trace.logits[[r, label]];
            dlogits[[r, 0]] = (l0 - lse).exp();
            dlogits[[r, 1]] = (l1 - lse).exp();
            dlogits[[r, label]] -= 1.0;
        }

        let mut grad = self.zeros_like();
        let embedding = trace.acts.last().expect("nonempty");
        grad.classifier.weight = embedding.t().dot(&dlogits);
        grad.classifier.bias = dlogits.sum_axis(Axis(0));
        let mut delta = dlogits.dot(&self.classifier.weight.t());

        for l in (0..self.mlp.len()).rev() {
            if l + 1 < self.mlp.len() {
                delta.zip_mut_with(&trace.pre[l], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            grad.mlp[l].weight = trace.acts[l].t().dot(&delta);
            grad.mlp[l].bias = delta.sum_axis(Axis(0));
            delta = delta.dot(&self.mlp[l].weight.t());
        }
        delta.zip_mut_with(&trace.proj_pre, |d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });

        for (model, start, x) in &trace.groups {
            let d = delta.slice(s![*start..*start + x.nrows(), ..]);
            let g = &mut grad.projections[*model];
            g.weight += &x.t().dot(&d);
            g.bias += &d.sum_axis(Axis(0));
        }
        Ok((loss, grad))
    }

    /// Class-1 margin `logit₁ − logit₀` per example, in batch order.
    pub fn scores(&self, batch: &[Example<'_>]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let (trace, order) = self.forward(batch)?;
        let mut out = vec![0.0; batch.len()];
        for (r, &k) in order.iter().enumerate() {
            out[k] = trace.logits[[r, 1]] - trace.logits[[r, 0]];
        }
        Ok(out)
    }

    /// Embedding rows for a block of standardized states of one model.
    pub(crate) fn embed_rows(&self, model: usize, x: &Array2<f64>) -> Array2<f64> {
        let mut a = relu(&self.projections[model].apply(x));
        for (l, layer) in self.mlp.iter().enumerate() {
            let z = layer.apply(&a);
            a = if l + 1 < self.mlp.len() { relu(&z) } else { z };
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            hidden_width: 16,
            mlp_widths: vec![8, 32],
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn projection_shapes_follow_store_dims() {
        let net = init_network(&[8, 12], &cfg(0)).unwrap();
        assert_eq!(net.projections[0].weight.dim(), (8, 16));
        assert_eq!(net.projections[1].weight.dim(), (12, 16));
        assert_eq!(net.embed_dim(), 32);
        assert_eq!(net.classifier.weight.dim(), (32, 2));
    }

    #[test]
    fn init_is_seeded() {
        let a = init_network(&[8, 12], &cfg(3)).unwrap();
        assert_eq!(a, init_network(&[8, 12], &cfg(3)).unwrap());
        assert_ne!(a, init_network(&[8, 12], &cfg(4)).unwrap());
        assert!(init_network(&[8, 0], &cfg(3)).is_err());
        assert!(init_network(&[], &cfg(3)).is_err());
    }

    #[test]
    fn equal_logits_cost_ln2_each() {
        let mut net = init_network(&[3], &cfg(1)).unwrap();
        net.classifier.weight.fill(0.0);
        let s = [0.3, -1.0, 2.0];
        let batch = [
            Example { model: 0, state: &s, label: 0 },
            Example { model: 0, state: &s, label: 1 },
        ];
        let (loss, _) = net.loss_and_grad(&batch).unwrap();
        assert!((loss / 2.0 - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn duplicated_example_doubles_its_contribution() {
        let net = init_network(&[3, 2], &cfg(2)).unwrap();
        let s0 = [0.5, -0.2, 1.0];
        let s1 = [1.5, 0.7];
        let one = [
            Example { model: 0, state: &s0, label: 1 },
            Example { model: 1, state: &s1, label: 0 },
        ];
        let two = [one[0], one[1], one[0]];
        let (l1, g1) = net.loss_and_grad(&one).unwrap();
        let (l2, g2) = net.loss_and_grad(&two).unwrap();
        let (la, ga) = net.loss_and_grad(&one[..1]).unwrap();
        assert!((l2 - (l1 + la)).abs() < 1e-12);
        for ((x1, x2), xa) in g1.tensors().iter().zip(g2.tensors()).zip(ga.tensors()) {
            for ((a, b), c) in x1.iter().zip(x2.iter()).zip(xa.iter()) {
                assert!((b - (a + c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wrong_width_is_rejected() {
        let net = init_network(&[3], &cfg(2)).unwrap();
        let s = [1.0, 2.0];
        let batch = [Example { model: 0, state: &s, label: 0 }];
        assert!(matches!(
            net.loss_and_grad(&batch),
            Err(Error::DimensionMismatch { expected: 3, found: 2, .. })
        ));
    }
}
