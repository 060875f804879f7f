//! Synthetic corpora whose targets are a known linear function of the mean
//! word embedding. Used by the examples, the smoke tests and the ablations.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{AnnotationSchema, Dataset, Record, Variable};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub vocab: usize,
    pub dim: usize,
    pub n_targets: usize,
    /// Inclusive bounds on tokens per document.
    pub min_len: usize,
    pub max_len: usize,
    /// Standard deviation of the Gaussian noise added to every target.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_docs: 200,
            vocab: 100,
            dim: 16,
            n_targets: 1,
            min_len: 3,
            max_len: 10,
            noise: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub dataset: Dataset,
    /// The table the targets were generated from.
    pub table: EmbeddingTable,
    /// `weights[k]` maps a mean embedding to target `k` (before offset).
    pub weights: Vec<Vec<f64>>,
}

pub fn word(i: usize) -> String {
    format!("w{i}")
}

/// Targets are `5 + w_k · mean(embeddings) + noise`, on a `[-100, 100]`
/// custom schema with variables `y0, y1, ...`.
pub fn linear_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.n_docs == 0 || cfg.vocab == 0 || cfg.dim == 0 || cfg.n_targets == 0 {
        return Err(Error::invalid("synthetic corpus sizes must be positive"));
    }
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::invalid("need 1 <= min_len <= max_len"));
    }
    let mut rng = seed::rng(cfg.seed);
    let vectors: Vec<Vec<f64>> = (0..cfg.vocab)
        .map(|_| (0..cfg.dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let table = EmbeddingTable::from_entries((0..cfg.vocab).map(|i| (word(i), vectors[i].clone())), cfg.dim)?;
    let scale = 3.0 / (cfg.dim as f64).sqrt();
    let weights: Vec<Vec<f64>> = (0..cfg.n_targets)
        .map(|_| (0..cfg.dim).map(|_| rng.random_range(-scale..scale)).collect())
        .collect();

    let mut records = Vec::with_capacity(cfg.n_docs);
    for i in 0..cfg.n_docs {
        let len = rng.random_range(cfg.min_len..=cfg.max_len);
        let ids: Vec<usize> = (0..len).map(|_| rng.random_range(0..cfg.vocab)).collect();
        let mut mean = vec![0.0; cfg.dim];
        for &id in &ids {
            for (m, x) in mean.iter_mut().zip(&vectors[id]) {
                *m += x / len as f64;
            }
        }
        let scores = weights
            .iter()
            .map(|w| {
                let clean: f64 = w.iter().zip(&mean).map(|(a, b)| a * b).sum();
                5.0 + clean + cfg.noise * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let text = ids.iter().map(|&id| word(id)).collect::<Vec<_>>().join(" ");
        records.push(Record { text, scores, line: i + 2 });
    }
    let schema = AnnotationSchema::custom((0..cfg.n_targets).map(|k| Variable::new(format!("y{k}"), -100.0, 100.0)).collect())?;
    Ok(SynthCorpus {
        dataset: Dataset::new(schema, records),
        table,
        weights,
    })
}
