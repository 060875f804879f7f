//! Parameter persistence: a flat little-endian `f64` blob next to a JSON
//! manifest naming every tensor, its shape and offset, the model kind,
//! dimensions and seed, and a SHA-256 of the blob.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::layers::ParamStore;
use super::neural::{build_model, NeuralModel};
use super::ridge::RidgeModel;
use super::{Hyperparams, ModelKind, ModelSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the blob, in `f64` elements.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub n_targets: usize,
    pub seed: u64,
    /// Present for neural kinds.
    pub hyper: Option<Hyperparams>,
    pub tensors: Vec<TensorEntry>,
    /// Hex SHA-256 of the blob bytes.
    pub blob_sha256: String,
}

/// `<stem>.bin` and `<stem>.json`.
pub fn artifact_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

fn encode(tensors: &[(String, &Tensor)]) -> (Vec<u8>, Vec<TensorEntry>) {
    let mut blob = Vec::new();
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0;
    for (name, t) in tensors {
        entries.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += t.numel();
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    (blob, entries)
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write(stem: &Path, mut manifest: Manifest, tensors: &[(String, &Tensor)]) -> Result<Manifest> {
    let (blob, entries) = encode(tensors);
    manifest.tensors = entries;
    manifest.blob_sha256 = sha_hex(&blob);
    let (bin, json) = artifact_paths(stem);
    fs::write(&bin, &blob).map_err(|e| Error::io(&bin, e))?;
    fs::write(&json, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&json, e))?;
    Ok(manifest)
}

fn read(stem: &Path) -> Result<(Manifest, Vec<Tensor>)> {
    let (bin, json) = artifact_paths(stem);
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let blob = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if sha_hex(&blob) != manifest.blob_sha256 {
        return Err(Error::invalid(format!("{}: checksum does not match manifest", bin.display())));
    }
    if blob.len() % 8 != 0 {
        return Err(Error::invalid(format!("{}: length is not a multiple of 8", bin.display())));
    }
    let values: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for e in &manifest.tensors {
        let n: usize = e.shape.iter().product();
        let slice = values
            .get(e.offset..e.offset + n)
            .ok_or_else(|| Error::invalid(format!("tensor `{}` runs past the end of the blob", e.name)))?;
        tensors.push(Tensor::new(e.shape.clone(), slice.to_vec())?);
    }
    Ok((manifest, tensors))
}

/// Writes layer parameters and the embedding matrix.
pub fn save_neural(model: &NeuralModel, stem: &Path) -> Result<Manifest> {
    let spec = model.spec();
    let mut tensors: Vec<(String, &Tensor)> = model.params().iter().map(|(n, t)| (n.to_string(), t)).collect();
    tensors.push(("embedding".to_string(), model.embedding()));
    let manifest = Manifest {
        kind: spec.kind,
        input_dim: spec.input_dim,
        n_targets: spec.n_targets,
        seed: model.seed(),
        hyper: Some(spec.hyper.clone()),
        tensors: Vec::new(),
        blob_sha256: String::new(),
    };
    write(stem, manifest, &tensors)
}

/// Rebuilds the architecture from the manifest and restores every tensor.
/// The embedding comes back frozen.
pub fn load_neural(stem: &Path) -> Result<NeuralModel> {
    let (manifest, mut tensors) = read(stem)?;
    let hyper = manifest
        .hyper
        .clone()
        .ok_or_else(|| Error::invalid("manifest lacks hyperparameters for a neural model"))?;
    let spec = ModelSpec::new(manifest.kind, manifest.input_dim, manifest.n_targets).with_hyper(hyper);
    let stub = EmbeddingTable::from_entries(std::iter::empty(), manifest.input_dim)?;
    let mut model = build_model(&spec, &stub, manifest.seed)?;

    if manifest.tensors.last().map(|e| e.name.as_str()) != Some("embedding") {
        return Err(Error::invalid("manifest lacks the embedding tensor"));
    }
    let embedding = tensors.pop().expect("checked above");
    if embedding.dims2().map(|d| d.1) != Some(manifest.input_dim) {
        return Err(Error::Shape {
            op: "load_neural (embedding)",
            left: vec![manifest.input_dim],
            right: embedding.shape().to_vec(),
        });
    }
    let mut store = ParamStore::default();
    for (e, t) in manifest.tensors.iter().zip(tensors) {
        store.add(e.name.clone(), t);
    }
    model.replace_params(store)?;
    *model.embedding_mut() = embedding;
    Ok(model)
}

/// Writes per-target weights, intercepts and strengths. `kind` must be a
/// ridge kind.
pub fn save_ridge(model: &RidgeModel, kind: ModelKind, stem: &Path) -> Result<Manifest> {
    if kind.is_neural() {
        return Err(Error::invalid(format!("{kind} is not a ridge model")));
    }
    let k = model.n_targets();
    let p = model.weights.first().map_or(0, Vec::len);
    let mut owned = Vec::with_capacity(3);
    owned.push(Tensor::new(vec![k, p], model.weights.concat())?);
    owned.push(Tensor::vector(model.intercepts.clone()));
    owned.push(Tensor::vector(model.lambdas.clone()));
    let names = ["weights", "intercepts", "lambdas"];
    let tensors: Vec<(String, &Tensor)> = names.iter().map(|n| n.to_string()).zip(&owned).collect();
    let manifest = Manifest {
        kind,
        input_dim: p,
        n_targets: k,
        seed: 0,
        hyper: None,
        tensors: Vec::new(),
        blob_sha256: String::new(),
    };
    write(stem, manifest, &tensors)
}

pub fn load_ridge(stem: &Path) -> Result<(ModelKind, RidgeModel)> {
    let (manifest, tensors) = read(stem)?;
    let names: Vec<&str> = manifest.tensors.iter().map(|e| e.name.as_str()).collect();
    if names != ["weights", "intercepts", "lambdas"] {
        return Err(Error::invalid(format!("unexpected ridge tensors {names:?}")));
    }
    let (k, p) = (manifest.n_targets, manifest.input_dim);
    if tensors[0].shape() != [k, p] || tensors[1].numel() != k || tensors[2].numel() != k {
        return Err(Error::invalid("ridge tensor shapes disagree with the manifest"));
    }
    let weights = if p == 0 {
        vec![Vec::new(); k]
    } else {
        tensors[0].data().chunks(p).map(<[f64]>::to_vec).collect()
    };
    Ok((
        manifest.kind,
        RidgeModel {
            weights,
            intercepts: tensors[1].data().to_vec(),
            lambdas: tensors[2].data().to_vec(),
        },
    ))
}
