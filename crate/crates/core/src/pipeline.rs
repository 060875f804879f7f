//! Glue from datasets to the [`Regressor`] interface for all seven model
//! kinds.

use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;

use crate::data::Dataset;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::Regressor;
use crate::models::{FeatureMatrix, Hyperparams, ModelInput, ModelKind, ModelSpec, RidgeModel, LAMBDA_GRID};
use crate::text::{bag_of_vectors, fit_ngram_vocab, ngram_features, tokenize, TokenSeq, DEFAULT_MAX_LEN};
use crate::training::{fit, trace_csv, TrainConfig};

/// Every token of every text, for restricting embedding loads.
pub fn dataset_vocabulary(dataset: &Dataset) -> HashSet<String> {
    dataset
        .texts()
        .flat_map(|t| tokenize(t).tokens)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub max_len: usize,
    pub train: TrainConfig,
    pub hyper: Hyperparams,
    pub lambda_grid: Vec<f64>,
    /// Train one single-output network per variable instead of one
    /// multi-output network.
    pub per_variable: bool,
    /// Directory for per-run `epoch,loss` CSVs.
    pub trace_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_len: DEFAULT_MAX_LEN,
            train: TrainConfig::default(),
            hyper: Hyperparams::default(),
            lambda_grid: LAMBDA_GRID.to_vec(),
            per_variable: false,
            trace_dir: None,
        }
    }
}

/// One model kind with everything it needs to train.
#[derive(Clone, Debug)]
pub struct ModelRegressor<'t> {
    pub kind: ModelKind,
    pub table: Option<&'t EmbeddingTable>,
    pub config: PipelineConfig,
    label: String,
}

impl<'t> ModelRegressor<'t> {
    /// `table` is required for every kind except `ridge_ngram`.
    pub fn new(kind: ModelKind, table: Option<&'t EmbeddingTable>, config: PipelineConfig) -> Result<Self> {
        if kind != ModelKind::RidgeNgram && table.is_none() {
            return Err(Error::invalid(format!("{kind} needs an embedding table")));
        }
        if kind.is_neural() {
            config.train.validate()?;
            ModelSpec::new(kind, table.map_or(1, EmbeddingTable::dim), 1)
                .with_hyper(config.hyper.clone())
                .validate()?;
        }
        Ok(Self {
            kind,
            table,
            label: kind.name().to_string(),
            config,
        })
    }

    /// Overrides the name used in reports.
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn fit_ridge(&self, tokens: &[TokenSeq], targets: &[Vec<f64>], train: &[usize], test: &[usize], seed: u64) -> Result<Vec<Vec<f64>>> {
        let (x_train, x_test) = match self.kind {
            ModelKind::RidgeNgram => {
                let train_docs: Vec<TokenSeq> = train.iter().map(|&i| tokens[i].clone()).collect();
                let vocab = fit_ngram_vocab(&train_docs)?;
                let rows = |idx: &[usize]| idx.iter().map(|&i| ngram_features(&tokens[i], &vocab)).collect();
                (
                    FeatureMatrix::sparse(rows(train), vocab.n_features())?,
                    FeatureMatrix::sparse(rows(test), vocab.n_features())?,
                )
            }
            _ => {
                let table = self.table.expect("checked in new");
                let rows = |idx: &[usize]| idx.iter().map(|&i| bag_of_vectors(&tokens[i], table)).collect();
                (FeatureMatrix::dense(rows(train))?, FeatureMatrix::dense(rows(test))?)
            }
        };
        let y: Vec<Vec<f64>> = train.iter().map(|&i| targets[i].clone()).collect();
        let model = RidgeModel::fit_auto(&x_train, &y, &self.config.lambda_grid, seed)?;
        log::debug!("{} lambdas {:?}", self.label, model.lambdas);
        Ok(model.predict(&x_test))
    }

    fn fit_neural(
        &self,
        tokens: &[TokenSeq],
        targets: &[Vec<f64>],
        train: &[usize],
        test: &[usize],
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        let table = self.table.expect("checked in new");
        let inputs: Vec<ModelInput> = tokens
            .iter()
            .map(|t| ModelInput::encode(t, table, self.config.max_len))
            .collect();
        let train_inputs: Vec<ModelInput> = train.iter().map(|&i| inputs[i].clone()).collect();
        let test_inputs: Vec<ModelInput> = test.iter().map(|&i| inputs[i].clone()).collect();
        let k = targets[0].len();
        let (mean, scale) = standardizer(train.iter().map(|&i| targets[i].as_slice()), k);
        let z = |i: usize, v: usize| (targets[i][v] - mean[v]) / scale[v];

        let config = TrainConfig { seed, ..self.config.train.clone() };
        let groups: Vec<Vec<usize>> = if self.config.per_variable {
            (0..k).map(|v| vec![v]).collect()
        } else {
            vec![(0..k).collect()]
        };
        let mut out = vec![vec![0.0; k]; test.len()];
        for (g, vars) in groups.iter().enumerate() {
            let spec = ModelSpec::new(self.kind, table.dim(), vars.len()).with_hyper(self.config.hyper.clone());
            let y: Vec<Vec<f64>> = train.iter().map(|&i| vars.iter().map(|&v| z(i, v)).collect()).collect();
            let (model, trace) = fit(&spec, table, &train_inputs, &y, &config)?;
            self.write_trace(seed, g, &trace)?;
            for (row, pred) in out.iter_mut().zip(model.predict(&test_inputs)?) {
                for (&v, p) in vars.iter().zip(pred) {
                    row[v] = p * scale[v] + mean[v];
                }
            }
        }
        Ok(out)
    }

    fn write_trace(&self, seed: u64, group: usize, trace: &[f64]) -> Result<()> {
        let Some(dir) = &self.config.trace_dir else {
            return Ok(());
        };
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let suffix = if self.config.per_variable { format!("-v{group}") } else { String::new() };
        let path = dir.join(format!("{}-{seed:016x}{suffix}.csv", self.label));
        fs::write(&path, trace_csv(trace)).map_err(|e| Error::io(&path, e))
    }
}

/// Per-variable training mean and standard deviation (1 when flat).
fn standardizer<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.clone().count().max(1) as f64;
    let mut mean = vec![0.0; k];
    for r in rows.clone() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; k];
    for r in rows {
        for ((s, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    let scale = var.iter().map(|&v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    (mean, scale)
}

impl Regressor for ModelRegressor<'_> {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn fit_predict(&self, dataset: &Dataset, train: &[usize], test: &[usize], seed: u64) -> Result<Vec<Vec<f64>>> {
        if train.is_empty() {
            return Err(Error::invalid("empty training split"));
        }
        let tokens: Vec<TokenSeq> = dataset.texts().map(tokenize).collect();
        let targets: Vec<Vec<f64>> = dataset.records.iter().map(|r| r.scores.clone()).collect();
        if self.kind.is_neural() {
            self.fit_neural(&tokens, &targets, train, test, seed)
        } else {
            self.fit_ridge(&tokens, &targets, train, test, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AnnotationSchema, Record, Variable};
    use crate::eval::{plan_repeated_cv, run_repeated_cv};

    #[test]
    fn standardizer_handles_flat_columns() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let (m, s) = standardizer(rows.iter().map(Vec::as_slice), 2);
        assert_eq!(m, vec![2.0, 5.0]);
        assert_eq!(s, vec![1.0, 1.0]);
    }

    #[test]
    fn ridge_ngram_learns_keyword_polarity() {
        let schema = AnnotationSchema::custom(vec![Variable::new("score", -10.0, 10.0)]).unwrap();
        let words = ["great", "awful", "fine", "dull", "bright", "grim"];
        let weight = [2.0, -2.0, 0.5, -0.5, 1.0, -1.0];
        let records = (0..60)
            .map(|i| {
                let a = i % 6;
                let b = (i * 5 + 1) % 6;
                Record {
                    text: format!("the {} and {} day", words[a], words[b]),
                    scores: vec![weight[a] + weight[b]],
                    line: 0,
                }
            })
            .collect();
        let d = Dataset::new(schema, records);
        let reg = ModelRegressor::new(ModelKind::RidgeNgram, None, PipelineConfig::default()).unwrap();
        let plan = plan_repeated_cv(d.len(), 5, 1, 0).unwrap();
        let rep = run_repeated_cv(&plan, &[&reg], &d).unwrap();
        assert!(rep[0].grand_mean() > 0.9, "{}", rep[0].grand_mean());
    }

    #[test]
    fn embedding_kinds_require_a_table() {
        assert!(ModelRegressor::new(ModelKind::RidgeBv, None, PipelineConfig::default()).is_err());
        assert!(ModelRegressor::new(ModelKind::Gru, None, PipelineConfig::default()).is_err());
    }
}
