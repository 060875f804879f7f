use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seed;
use crate::tape::{Mode, Tape, Var};
use crate::tensor::Tensor;
use crate::text::{encode_sequence, EncodedSeq, TokenSeq};

use super::layers::{Conv, Dense, GruCell, LstmCell, ParamStore, Recurrent};
use super::{ModelKind, ModelSpec};

/// One text encoded for the neural models.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelInput {
    /// Padded id sequence for the sequence models.
    pub seq: EncodedSeq,
    /// Rows of every in-vocabulary token (untruncated), for bag-of-vectors.
    pub bag: Vec<usize>,
}

impl ModelInput {
    pub fn encode(tokens: &TokenSeq, table: &EmbeddingTable, max_len: usize) -> Self {
        Self {
            seq: encode_sequence(tokens, table, max_len),
            bag: tokens.iter().filter_map(|t| table.id(t)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
enum Arch {
    Ffn {
        hidden: [Dense; 2],
        head: Dense,
    },
    Cnn {
        conv: Conv,
        dense: Dense,
        head: Dense,
    },
    Rnn {
        cell: Recurrent,
        dense: Dense,
        head: Dense,
    },
    CnnLstm {
        conv: Conv,
        cell: LstmCell,
        dense: Dense,
        head: Dense,
    },
}

/// Variables of one forward pass.
#[derive(Debug)]
pub struct Forward {
    /// Predictions `[batch × n_targets]`.
    pub output: Var,
    /// Parameter variables, indexed like the model's `ParamStore`.
    pub params: Vec<Var>,
    pub embedding: Var,
}

#[derive(Clone, Debug)]
pub struct NeuralModel {
    spec: ModelSpec,
    seed: u64,
    params: ParamStore,
    embedding: Tensor,
    arch: Arch,
}

/// Allocates a model of `spec.kind` with Glorot-uniform weights and zero
/// biases. The embedding matrix is copied from `table` and starts frozen.
pub fn build_model(spec: &ModelSpec, table: &EmbeddingTable, seed: u64) -> Result<NeuralModel> {
    spec.validate()?;
    if !spec.kind.is_neural() {
        return Err(Error::invalid(format!("{} is not a neural model", spec.kind)));
    }
    if table.dim() != spec.input_dim {
        return Err(Error::Shape {
            op: "build_model (embedding dim)",
            left: vec![spec.input_dim],
            right: vec![table.dim()],
        });
    }
    let mut rng = seed::rng(seed);
    let mut ps = ParamStore::default();
    let h = &spec.hyper;
    let d = spec.input_dim;
    let k = spec.n_targets;
    let arch = match spec.kind {
        ModelKind::Ffn => {
            let [u1, u2] = h.ffn_units;
            let d1 = Dense::new(&mut ps, &mut rng, "dense1", d, u1);
            let d2 = Dense::new(&mut ps, &mut rng, "dense2", u1, u2);
            let head = Dense::new(&mut ps, &mut rng, "head", u2, k);
            Arch::Ffn {
                hidden: [d1, d2],
                head,
            }
        }
        ModelKind::Cnn => {
            let conv = Conv::new(&mut ps, &mut rng, "conv", d, h.conv_channels);
            let dense = Dense::new(&mut ps, &mut rng, "dense", h.conv_channels, h.dense_units);
            let head = Dense::new(&mut ps, &mut rng, "head", h.dense_units, k);
            Arch::Cnn { conv, dense, head }
        }
        ModelKind::Gru | ModelKind::Lstm => {
            let u = h.recurrent_units;
            let cell = if spec.kind == ModelKind::Gru {
                Recurrent::Gru(GruCell::new(&mut ps, &mut rng, "gru", d, u))
            } else {
                Recurrent::Lstm(LstmCell::new(&mut ps, &mut rng, "lstm", d, u))
            };
            let dense = Dense::new(&mut ps, &mut rng, "dense", u, h.dense_units);
            let head = Dense::new(&mut ps, &mut rng, "head", h.dense_units, k);
            Arch::Rnn { cell, dense, head }
        }
        ModelKind::CnnLstm => {
            let conv = Conv::new(&mut ps, &mut rng, "conv", d, h.conv_channels);
            let cell = LstmCell::new(&mut ps, &mut rng, "lstm", h.conv_channels, h.recurrent_units);
            let dense = Dense::new(&mut ps, &mut rng, "dense", h.recurrent_units, h.dense_units);
            let head = Dense::new(&mut ps, &mut rng, "head", h.dense_units, k);
            Arch::CnnLstm {
                conv,
                cell,
                dense,
                head,
            }
        }
        ModelKind::RidgeNgram | ModelKind::RidgeBv => unreachable!(),
    };
    Ok(NeuralModel {
        spec: spec.clone(),
        seed,
        params: ps,
        embedding: table.matrix().clone(),
        arch,
    })
}

impl NeuralModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Layer parameters only; the embedding matrix is not counted.
    pub fn n_params(&self) -> usize {
        self.params.count()
    }

    pub fn embedding(&self) -> &Tensor {
        &self.embedding
    }

    pub fn embedding_mut(&mut self) -> &mut Tensor {
        &mut self.embedding
    }

    pub fn embedding_trainable(&self) -> bool {
        self.embedding.requires_grad
    }

    pub fn set_embedding_trainable(&mut self, trainable: bool) {
        self.embedding.requires_grad = trainable;
        if !trainable {
            self.embedding.zero_grad();
        }
    }

    /// Shortest frame window the architecture accepts.
    fn min_frames(&self) -> usize {
        match self.arch {
            Arch::CnnLstm { .. } => self.spec.hyper.pool_size,
            _ => 1,
        }
    }

    /// Embeds the valid frames of one input, padded with the zero row up to
    /// the architecture's minimum length.
    fn embed_sequence<R: rand::Rng + ?Sized>(
        &self,
        tape: &mut Tape<'_>,
        emb: Var,
        input: &ModelInput,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        let mut ids = input.seq.valid_ids().to_vec();
        if ids.len() < self.min_frames() {
            ids.resize(self.min_frames(), EmbeddingTable::PAD);
        }
        let x = tape.gather(emb, &ids)?;
        tape.dropout(x, self.spec.hyper.embedding_dropout, mode, rng)
    }

    fn check_input(&self, input: &ModelInput) -> Result<()> {
        let rows = self.embedding.dims2().map_or(0, |d| d.0);
        if let Some(&bad) = input.seq.ids.iter().chain(&input.bag).find(|&&i| i >= rows) {
            return Err(Error::invalid(format!(
                "input row id {bad} outside an embedding table of {rows} rows"
            )));
        }
        Ok(())
    }

    /// Records the model on `tape` for a batch and returns the prediction
    /// variable. Eval mode draws nothing from `rng`.
    pub fn forward<'a, R: rand::Rng + ?Sized>(
        &'a self,
        tape: &mut Tape<'a>,
        batch: &[&ModelInput],
        mode: Mode,
        rng: &mut R,
    ) -> Result<Forward> {
        if batch.is_empty() {
            return Err(Error::invalid("forward on an empty batch"));
        }
        for input in batch {
            self.check_input(input)?;
        }
        let vars = self.params.register(tape);
        let emb = tape.leaf(&self.embedding);
        let drop = self.spec.hyper.dense_dropout;
        let d = self.spec.input_dim;

        let features = match &self.arch {
            Arch::Ffn { hidden, .. } => {
                let mut rows = Vec::with_capacity(batch.len());
                for input in batch {
                    let v = if input.bag.is_empty() {
                        tape.constant(Tensor::zeros(&[d]))
                    } else {
                        let g = tape.gather(emb, &input.bag)?;
                        tape.mean_rows(g)?
                    };
                    rows.push(v);
                }
                let mut x = tape.stack(&rows)?;
                for layer in hidden {
                    let a = layer.forward(tape, &vars, x)?;
                    let a = tape.relu(a);
                    x = tape.dropout(a, drop, mode, rng)?;
                }
                x
            }
            Arch::Cnn { conv, dense, .. } => {
                let mut rows = Vec::with_capacity(batch.len());
                for input in batch {
                    let x = self.embed_sequence(tape, emb, input, mode, rng)?;
                    let c = conv.forward(tape, &vars, x)?;
                    let c = tape.relu(c);
                    let p = tape.global_max_pool(c)?;
                    rows.push(tape.dropout(p, drop, mode, rng)?);
                }
                let x = tape.stack(&rows)?;
                let a = dense.forward(tape, &vars, x)?;
                let a = tape.relu(a);
                tape.dropout(a, drop, mode, rng)?
            }
            Arch::Rnn { cell, dense, .. } => {
                let mut rows = Vec::with_capacity(batch.len());
                for input in batch {
                    let x = self.embed_sequence(tape, emb, input, mode, rng)?;
                    let h = cell.run(tape, &vars, x)?;
                    rows.push(tape.dropout(h, drop, mode, rng)?);
                }
                let x = tape.stack(&rows)?;
                let a = dense.forward(tape, &vars, x)?;
                let a = tape.relu(a);
                tape.dropout(a, drop, mode, rng)?
            }
            Arch::CnnLstm {
                conv, cell, dense, ..
            } => {
                let hp = &self.spec.hyper;
                let mut rows = Vec::with_capacity(batch.len());
                for input in batch {
                    let x = self.embed_sequence(tape, emb, input, mode, rng)?;
                    let c = conv.forward(tape, &vars, x)?;
                    let c = tape.relu(c);
                    let p = tape.max_pool_time(c, hp.pool_size, hp.pool_stride)?;
                    let p = tape.dropout(p, drop, mode, rng)?;
                    let h = cell.run(tape, &vars, p)?;
                    rows.push(tape.dropout(h, drop, mode, rng)?);
                }
                let x = tape.stack(&rows)?;
                let a = dense.forward(tape, &vars, x)?;
                let a = tape.relu(a);
                tape.dropout(a, drop, mode, rng)?
            }
        };
        let head = match &self.arch {
            Arch::Ffn { head, .. }
            | Arch::Cnn { head, .. }
            | Arch::Rnn { head, .. }
            | Arch::CnnLstm { head, .. } => head,
        };
        let output = head.forward(tape, &vars, features)?;
        Ok(Forward {
            output,
            params: vars,
            embedding: emb,
        })
    }

    /// Eval-mode predictions, one row of `n_targets` scores per input.
    pub fn predict(&self, inputs: &[ModelInput]) -> Result<Vec<Vec<f64>>> {
        let k = self.spec.n_targets;
        let mut out = Vec::with_capacity(inputs.len());
        // eval mode never draws from this
        let mut rng = seed::rng(0);
        for chunk in inputs.chunks(64) {
            let batch: Vec<&ModelInput> = chunk.iter().collect();
            let mut tape = Tape::new();
            let fwd = self.forward(&mut tape, &batch, Mode::Eval, &mut rng)?;
            out.extend(tape.value(fwd.output).data().chunks(k).map(<[f64]>::to_vec));
        }
        Ok(out)
    }

    /// Head parameters `(weights [units × n_targets], bias [n_targets])`.
    pub fn head(&self) -> (&Tensor, &Tensor) {
        let head = match &self.arch {
            Arch::Ffn { head, .. }
            | Arch::Cnn { head, .. }
            | Arch::Rnn { head, .. }
            | Arch::CnnLstm { head, .. } => head,
        };
        (self.params.get(head.w), self.params.get(head.b))
    }

    /// The recurrent cell of GRU/LSTM models.
    pub fn recurrent(&self) -> Option<Recurrent> {
        match &self.arch {
            Arch::Rnn { cell, .. } => Some(*cell),
            Arch::CnnLstm { cell, .. } => Some(Recurrent::Lstm(*cell)),
            _ => None,
        }
    }

    pub(crate) fn replace_params(&mut self, params: ParamStore) -> Result<()> {
        if params.names() != self.params.names() {
            return Err(Error::invalid("parameter names do not match the architecture"));
        }
        for (a, b) in params.tensors().iter().zip(self.params.tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::Shape {
                    op: "replace_params",
                    left: b.shape().to_vec(),
                    right: a.shape().to_vec(),
                });
            }
        }
        self.params = params;
        Ok(())
    }
}
