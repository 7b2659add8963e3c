use ndarray::{s, Array2, Array3, ArrayView2};

use super::network::AlignmentNetwork;
use super::train::prepare_inputs;
use crate::dataio::HiddenStateStore;
use crate::error::{Error, Result};

/// Aligned embeddings `z[m, i, :]` of every item under every source model.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedEmbeddings {
    pub model_names: Vec<String>,
    /// `models × items × embed_dim`.
    pub values: Array3<f64>,
}

impl AlignedEmbeddings {
    pub fn new(model_names: Vec<String>, values: Array3<f64>) -> Result<Self> {
        if model_names.len() != values.dim().0 {
            return Err(Error::InvalidArgument(
                "one name per embedding snapshot required".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite embedding".into()));
        }
        Ok(Self {
            model_names,
            values,
        })
    }

    pub fn num_models(&self) -> usize {
        self.values.dim().0
    }

    pub fn num_items(&self) -> usize {
        self.values.dim().1
    }

    pub fn dim(&self) -> usize {
        self.values.dim().2
    }

    /// The `items × dim` matrix of one model.
    pub fn model(&self, m: usize) -> ArrayView2<'_, f64> {
        self.values.slice(s![m, .., ..])
    }
}

/// `z = MLP(Proj_m(h))` for every model of `store` and every item.
pub fn forward_embed(network: &AlignmentNetwork, store: &HiddenStateStore) -> Result<AlignedEmbeddings> {
    if store.models().len() != network.num_models() {
        return Err(Error::InvalidArgument(format!(
            "network has {} projections, store has {} models",
            network.num_models(),
            store.models().len()
        )));
    }
    for (ms, &d) in store.models().iter().zip(&network.input_dims()) {
        if ms.dim() != d {
            return Err(Error::DimensionMismatch {
                model: ms.name.clone(),
                expected: d,
                found: ms.dim(),
            });
        }
    }
    let inputs = prepare_inputs(store, network.input_norms.as_deref());
    let dz = network.embed_dim();
    let mut values = Array3::<f64>::zeros((inputs.len(), store.num_items(), dz));
    for (m, x) in inputs.iter().enumerate() {
        let z: Array2<f64> = network.embed_rows(m, x);
        values.slice_mut(s![m, .., ..]).assign(&z);
    }
    AlignedEmbeddings::new(
        store.model_names().iter().map(|s| s.to_string()).collect(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::network::Linear;
    use crate::dataio::ModelStates;

    fn identity(input: usize, output: usize) -> Linear {
        let mut l = Linear::zeros(input, output);
        for k in 0..input.min(output) {
            l.weight[[k, k]] = 1.0;
        }
        l
    }

    #[test]
    fn identity_network_pads_and_truncates() {
        let net = AlignmentNetwork {
            model_names: vec!["a".into(), "b".into()],
            projections: vec![identity(3, 40), identity(50, 40)],
            mlp: vec![identity(40, 40), identity(40, 32)],
            classifier: Linear::zeros(32, 2),
            input_norms: None,
        };
        let small = ndarray::Array2::from_shape_fn((4, 3), |(i, j)| (i + j) as f32 * 0.25);
        let wide = ndarray::Array2::from_shape_fn((4, 50), |(i, j)| (i * 50 + j) as f32);
        let store = HiddenStateStore::new(
            4,
            vec![
                ModelStates { name: "a".into(), states: small.clone() },
                ModelStates { name: "b".into(), states: wide.clone() },
            ],
        )
        .unwrap();
        let z = forward_embed(&net, &store).unwrap();
        assert_eq!(z.values.dim(), (2, 4, 32));
        for i in 0..4 {
            for k in 0..32 {
                let padded = if k < 3 { f64::from(small[[i, k]]) } else { 0.0 };
                assert_eq!(z.values[[0, i, k]], padded);
                assert_eq!(z.values[[1, i, k]], f64::from(wide[[i, k]]));
            }
        }
    }
}
