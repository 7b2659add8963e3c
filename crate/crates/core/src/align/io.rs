//! Network files: a JSON manifest of layer shapes plus one little-endian `f32` blob.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::embed::AlignedEmbeddings;
use super::network::{AlignmentNetwork, InputNorm, Linear};
use crate::error::{Error, Result};

const FORMAT: &str = "alignment-network/1";
const EMBEDDINGS_FORMAT: &str = "aligned-embeddings/1";

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingsManifest {
    format: String,
    model_names: Vec<String>,
    num_items: usize,
    dim: usize,
    blob: String,
}

impl AlignedEmbeddings {
    /// Writes `<stem>.json` and a little-endian `f64` blob `<stem>.f64` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let blob = format!("{stem}.f64");
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in self.values.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let blob_path = dir.join(&blob);
        fs::write(&blob_path, bytes).map_err(|e| Error::io(&blob_path, e))?;
        let manifest = EmbeddingsManifest {
            format: EMBEDDINGS_FORMAT.into(),
            model_names: self.model_names.clone(),
            num_items: self.num_items(),
            dim: self.dim(),
            blob,
        };
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_string_pretty(&manifest).expect("serializable"))
            .map_err(|e| Error::io(&path, e))
    }

    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let path = manifest_path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: EmbeddingsManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if m.format != EMBEDDINGS_FORMAT {
            return Err(Error::format(path, format!("unsupported format `{}`", m.format)));
        }
        let blob_path = path.parent().unwrap_or(Path::new(".")).join(&m.blob);
        let bytes = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        let count = m.model_names.len() * m.num_items * m.dim;
        if bytes.len() != count * 8 {
            return Err(Error::format(&blob_path, "blob length disagrees with manifest"));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let values = ndarray::Array3::from_shape_vec((m.model_names.len(), m.num_items, m.dim), values)
            .expect("length checked");
        AlignedEmbeddings::new(m.model_names, values).map_err(|e| Error::format(path, e.to_string()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkManifest {
    format: String,
    model_names: Vec<String>,
    input_dims: Vec<usize>,
    hidden_width: usize,
    mlp_widths: Vec<usize>,
    input_norms: bool,
    blob: String,
    num_values: usize,
}

impl AlignmentNetwork {
    /// Writes `<stem>.json` and `<stem>.f32` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut values: Vec<f32> = Vec::new();
        if let Some(norms) = &self.input_norms {
            for n in norms {
                values.extend(n.shift.iter().map(|&v| v as f32));
                values.extend(n.scale.iter().map(|&v| v as f32));
            }
        }
        for t in self.tensors() {
            values.extend(t.iter().map(|&v| v as f32));
        }
        let blob = format!("{stem}.f32");
        let mut bytes = Vec::with_capacity(values.len() * 4);
        for v in &values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let blob_path = dir.join(&blob);
        fs::write(&blob_path, bytes).map_err(|e| Error::io(&blob_path, e))?;

        let manifest = NetworkManifest {
            format: FORMAT.into(),
            model_names: self.model_names.clone(),
            input_dims: self.input_dims(),
            hidden_width: self.hidden_width(),
            mlp_widths: self.mlp.iter().map(Linear::output_dim).collect(),
            input_norms: self.input_norms.is_some(),
            blob,
            num_values: values.len(),
        };
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_string_pretty(&manifest).expect("serializable"))
            .map_err(|e| Error::io(&path, e))
    }

    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let path = manifest_path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: NetworkManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if m.format != FORMAT {
            return Err(Error::format(path, format!("unsupported format `{}`", m.format)));
        }
        if m.model_names.len() != m.input_dims.len() || m.input_dims.is_empty() {
            return Err(Error::format(path, "model_names and input_dims disagree"));
        }
        let blob_path = path.parent().unwrap_or(Path::new(".")).join(&m.blob);
        let bytes = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        if bytes.len() != m.num_values * 4 {
            return Err(Error::format(&blob_path, "blob length disagrees with manifest"));
        }
        let mut values = bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = values.by_ref().take(n).collect();
            if v.len() == n {
                Ok(v)
            } else {
                Err(Error::format(path, "blob shorter than layer shapes"))
            }
        };

        let input_norms = if m.input_norms {
            let mut norms = Vec::new();
            for &d in &m.input_dims {
                norms.push(InputNorm {
                    shift: Array1::from(take(d)?),
                    scale: Array1::from(take(d)?),
                });
            }
            Some(norms)
        } else {
            None
        };
        let mut linear = |i: usize, o: usize| -> Result<Linear> {
            Ok(Linear {
                weight: Array2::from_shape_vec((i, o), take(i * o)?).expect("sized"),
                bias: Array1::from(take(o)?),
            })
        };
        let projections = m
            .input_dims
            .iter()
            .map(|&d| linear(d, m.hidden_width))
            .collect::<Result<Vec<_>>>()?;
        let mut mlp = Vec::new();
        let mut width = m.hidden_width;
        for &w in &m.mlp_widths {
            mlp.push(linear(width, w)?);
            width = w;
        }
        let classifier = linear(width, 2)?;
        let net = AlignmentNetwork {
            model_names: m.model_names,
            projections,
            mlp,
            classifier,
            input_norms,
        };
        if !net.is_finite() {
            return Err(Error::format(path, "non-finite parameter"));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use crate::align::{init_network, AlignedEmbeddings, AlignmentNetwork, InputNorm, TrainConfig};

    #[test]
    fn roundtrip_is_exact_at_f32() {
        let cfg = TrainConfig {
            hidden_width: 8,
            mlp_widths: vec![6, 32],
            ..TrainConfig::default()
        };
        let mut net = init_network(&[3, 5], &cfg).unwrap();
        net.input_norms = Some(vec![
            InputNorm { shift: ndarray::arr1(&[0.1, 0.2, 0.3]), scale: ndarray::arr1(&[1.0, 2.0, 3.0]) },
            InputNorm { shift: ndarray::Array1::zeros(5), scale: ndarray::Array1::ones(5) },
        ]);
        let dir = tempfile::tempdir().unwrap();
        net.save(dir.path(), "net").unwrap();
        let back = AlignmentNetwork::load(dir.path().join("net.json")).unwrap();
        for (a, b) in net.tensors().iter().zip(back.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!((*x as f32) as f64, *y);
            }
        }
        let bytes = std::fs::read(dir.path().join("net.f32")).unwrap();
        back.save(dir.path(), "again").unwrap();
        assert_eq!(bytes, std::fs::read(dir.path().join("again.f32")).unwrap());
        assert_eq!(back.model_names, net.model_names);
    }

    #[test]
    fn embeddings_roundtrip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let values = ndarray::Array3::from_shape_fn((2, 3, 4), |(m, i, k)| (m as f64 - 0.3) * (i * 4 + k) as f64 / 7.0);
        let emb = AlignedEmbeddings::new(vec!["a".into(), "b".into()], values).unwrap();
        emb.save(dir.path(), "emb").unwrap();
        assert_eq!(AlignedEmbeddings::load(dir.path().join("emb.json")).unwrap(), emb);
        std::fs::write(dir.path().join("emb.f64"), [0u8; 8]).unwrap();
        assert!(AlignedEmbeddings::load(dir.path().join("emb.json")).is_err());
    }
}
