//! The seven regressors: two ridge baselines and five neural architectures.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod io;
pub mod layers;
pub mod neural;
pub mod ridge;

pub use layers::{Conv, Dense, GruCell, LstmCell, ParamId, ParamStore, Recurrent};
pub use neural::{build_model, ModelInput, NeuralModel};
pub use ridge::{ridge_fit, ridge_select_lambda, FeatureMatrix, RidgeModel, LAMBDA_GRID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RidgeNgram,
    RidgeBv,
    Ffn,
    Cnn,
    Gru,
    Lstm,
    CnnLstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::RidgeNgram,
        ModelKind::RidgeBv,
        ModelKind::Ffn,
        ModelKind::Cnn,
        ModelKind::Gru,
        ModelKind::Lstm,
        ModelKind::CnnLstm,
    ];

    pub const NEURAL: [ModelKind; 5] = [
        ModelKind::Ffn,
        ModelKind::Cnn,
        ModelKind::Gru,
        ModelKind::Lstm,
        ModelKind::CnnLstm,
    ];

    pub fn is_neural(self) -> bool {
        !matches!(self, ModelKind::RidgeNgram | ModelKind::RidgeBv)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::RidgeNgram => "ridge_ngram",
            ModelKind::RidgeBv => "ridge_bv",
            ModelKind::Ffn => "ffn",
            ModelKind::Cnn => "cnn",
            ModelKind::Gru => "gru",
            ModelKind::Lstm => "lstm",
            ModelKind::CnnLstm => "cnn_lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown model kind `{s}` (expected one of ridge_ngram, ridge_bv, ffn, cnn, gru, lstm, cnn_lstm)"
                ))
            })
    }
}

/// Architecture sizes. `Default` is the fixed configuration used for every
/// corpus; tests shrink it for speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// The two dense layers of the FFN.
    pub ffn_units: [usize; 2],
    /// The dense layer between sequence encoder and output head.
    pub dense_units: usize,
    pub conv_channels: usize,
    pub recurrent_units: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub embedding_dropout: f64,
    pub dense_dropout: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            ffn_units: [256, 128],
            dense_units: 128,
            conv_channels: 128,
            recurrent_units: 128,
            pool_size: 2,
            pool_stride: 1,
            embedding_dropout: 0.2,
            dense_dropout: 0.5,
        }
    }
}

impl Hyperparams {
    /// Every layer width set to `units`; dropout rates unchanged.
    pub fn uniform_width(units: usize) -> Self {
        Self {
            ffn_units: [units, units],
            dense_units: units,
            conv_channels: units,
            recurrent_units: units,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Embedding dimension for neural kinds, feature count for ridge.
    pub input_dim: usize,
    pub n_targets: usize,
    pub hyper: Hyperparams,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_dim: usize, n_targets: usize) -> Self {
        Self {
            kind,
            input_dim,
            n_targets,
            hyper: Hyperparams::default(),
        }
    }

    pub fn with_hyper(mut self, hyper: Hyperparams) -> Self {
        self.hyper = hyper;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_targets == 0 {
            return Err(Error::invalid("a model needs at least one target"));
        }
        if self.input_dim == 0 {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        let h = &self.hyper;
        let widths = [
            h.ffn_units[0],
            h.ffn_units[1],
            h.dense_units,
            h.conv_channels,
            h.recurrent_units,
            h.pool_size,
            h.pool_stride,
        ];
        if widths.contains(&0) {
            return Err(Error::invalid("layer sizes must be at least 1"));
        }
        for p in [h.embedding_dropout, h.dense_dropout] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::invalid(format!("dropout {p} outside [0, 1)")));
            }
        }
        Ok(())
    }
}
