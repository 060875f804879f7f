//! Mini-batch Adam on mean squared error, with the three ways of handling
//! the embedding layer.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embeddings::{random_table, EmbeddingTable};
use crate::error::{Error, Result};
use crate::models::{build_model, ModelInput, ModelSpec, NeuralModel};
use crate::seed;
use crate::tape::{Mode, Tape};
use crate::tensor::Tensor;

const TAG_SHUFFLE: u64 = 0x5348;
const TAG_DROPOUT: u64 = 0x4452;
const TAG_INIT: u64 = 0x494e;
const TAG_LEARNED: u64 = 0x4c45;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Pre-trained vectors, never updated.
    Frozen,
    /// Pre-trained vectors, updated with the network.
    Tuned,
    /// Random vectors, updated with the network.
    Learned,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Frozen, Strategy::Tuned, Strategy::Learned];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Frozen => "frozen",
            Strategy::Tuned => "tuned",
            Strategy::Learned => "learned",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown strategy `{s}` (expected frozen, tuned or learned)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub strategy: Strategy,
    /// Rescale the global gradient norm to at most this value. Off by
    /// default; meant for diagnosing divergence.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            strategy: Strategy::Frozen,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("learning rate must be positive and betas in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::invalid("clip norm must be positive"));
        }
        Ok(())
    }

    /// Optimizer steps for `n` examples.
    pub fn steps_for(&self, n: usize) -> usize {
        self.epochs * n.div_ceil(self.batch_size)
    }
}

/// First and second moment buffers, one per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: usize,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }
}

/// One bias-corrected Adam update. Nothing is modified when any gradient is
/// non-finite.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "adam_step: {} parameters, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(Error::Shape {
                op: "adam_step",
                left: vec![p.len()],
                right: vec![g.len()],
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient {
                param: format!("#{i}"),
                step: state.t + 1,
            });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            p[j] -= config.learning_rate * mh / (vh.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

/// Allocates a model for `strategy`: pre-trained rows for frozen and tuned,
/// a random table over the same vocabulary for learned.
pub fn prepare_model(spec: &ModelSpec, table: &EmbeddingTable, strategy: Strategy, seed: u64) -> Result<NeuralModel> {
    let init_seed = seed::derive(seed, &[TAG_INIT]);
    let mut model = match strategy {
        Strategy::Frozen | Strategy::Tuned => build_model(spec, table, init_seed)?,
        Strategy::Learned => {
            let random = random_table(table.tokens(), table.dim(), seed::derive(seed, &[TAG_LEARNED]))?;
            build_model(spec, &random, init_seed)?
        }
    };
    model.set_embedding_trainable(strategy != Strategy::Frozen);
    Ok(model)
}

/// Builds a model for `config.strategy` and trains it.
pub fn fit(
    spec: &ModelSpec,
    table: &EmbeddingTable,
    inputs: &[ModelInput],
    targets: &[Vec<f64>],
    config: &TrainConfig,
) -> Result<(NeuralModel, Vec<f64>)> {
    let mut model = prepare_model(spec, table, config.strategy, config.seed)?;
    let trace = train(&mut model, inputs, targets, config)?;
    Ok((model, trace))
}

/// Runs `config.epochs` passes of shuffled mini-batches and returns the mean
/// per-example training loss of every epoch.
pub fn train(model: &mut NeuralModel, inputs: &[ModelInput], targets: &[Vec<f64>], config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n = inputs.len();
    if n == 0 {
        return Err(Error::invalid("cannot train on an empty split"));
    }
    if targets.len() != n {
        return Err(Error::Shape {
            op: "train (inputs vs targets)",
            left: vec![n],
            right: vec![targets.len()],
        });
    }
    let k = model.spec().n_targets;
    if let Some(bad) = targets.iter().find(|t| t.len() != k) {
        return Err(Error::Shape {
            op: "train (targets per example)",
            left: vec![k],
            right: vec![bad.len()],
        });
    }
    model.set_embedding_trainable(config.strategy != Strategy::Frozen);
    let tune_embedding = model.embedding_trainable();

    let mut sizes: Vec<usize> = model.params().tensors().iter().map(Tensor::numel).collect();
    if tune_embedding {
        sizes.push(model.embedding().numel());
    }
    let mut adam = AdamState::new(&sizes);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut seed::rng_for(config.seed, &[TAG_SHUFFLE, epoch as u64]));
        let mut dropout_rng = seed::rng_for(config.seed, &[TAG_DROPOUT, epoch as u64]);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&ModelInput> = chunk.iter().map(|&i| &inputs[i]).collect();
            let target = Tensor::new(
                vec![chunk.len(), k],
                chunk.iter().flat_map(|&i| targets[i].iter().copied()).collect(),
            )?;

            let (loss, mut grads) = {
                let mut tape = Tape::new();
                let fwd = model.forward(&mut tape, &batch, Mode::Train, &mut dropout_rng)?;
                let loss_var = tape.mse(fwd.output, &target)?;
                let mut g = tape.backward(loss_var)?;
                let mut out: Vec<Vec<f64>> = fwd
                    .params
                    .iter()
                    .zip(&sizes)
                    .map(|(&v, &len)| g.take(v).unwrap_or_else(|| vec![0.0; len]))
                    .collect();
                if tune_embedding {
                    out.push(g.take(fwd.embedding).unwrap_or_else(|| vec![0.0; model.embedding().numel()]));
                }
                (tape.value(loss_var).data()[0], out)
            };
            if !loss.is_finite() {
                return Err(Error::invalid(format!("training loss became non-finite at epoch {epoch}")));
            }
            epoch_loss += loss * chunk.len() as f64;

            let names = model.params().names().to_vec();
            for (i, g) in grads.iter().enumerate() {
                if g.iter().any(|x| !x.is_finite()) {
                    let param = names.get(i).cloned().unwrap_or_else(|| "embedding".to_string());
                    return Err(Error::NonFiniteGradient { param, step: adam.t() + 1 });
                }
            }
            if let Some(max) = config.clip_norm {
                let norm = grads.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
                if norm > max {
                    let s = max / norm;
                    grads.iter_mut().flatten().for_each(|x| *x *= s);
                }
            }
            let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            step_model(model, &grad_refs, &mut adam, config, tune_embedding)?;
        }
        trace.push(epoch_loss / n as f64);
    }
    Ok(trace)
}

fn step_model(
    model: &mut NeuralModel,
    grads: &[&[f64]],
    adam: &mut AdamState,
    config: &TrainConfig,
    tune_embedding: bool,
) -> Result<()> {
    if tune_embedding {
        // Split borrows: parameters and embedding live in different fields.
        let mut embedding = std::mem::replace(model.embedding_mut(), Tensor::zeros(&[0]));
        let result = {
            let mut params: Vec<&mut [f64]> = model.params_mut().tensors_mut().iter_mut().map(Tensor::data_mut).collect();
            params.push(embedding.data_mut());
            adam_step(&mut params, grads, adam, config)
        };
        *model.embedding_mut() = embedding;
        result
    } else {
        let mut params: Vec<&mut [f64]> = model.params_mut().tensors_mut().iter_mut().map(Tensor::data_mut).collect();
        adam_step(&mut params, grads, adam, config)
    }
}

/// Writes `epoch,loss` rows.
pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, crate::eval::report::fmt_sig(*l)));
    }
    out
}
