//! Byte-level recurrent language model: embedding lookup, stacked LSTM
//! layers and a softmax over the 225 kept byte values.
//!
//! Lines are modelled as `PAD b_1 … b_k` with the recurrent state reset at
//! every PAD, so PAD doubles as the start-of-line context. At inference the
//! state carries the whole history; the truncation length only limits how
//! far gradients flow during training.

mod checkpoint;
mod model;
mod net;
mod train;

pub use checkpoint::{load_rnn, read_rnn, save_rnn, write_rnn};
pub use model::{byte_tokenize, RnnModel, RnnState};
pub use train::{gradient_check, line_stream, tbptt_train, GradCheck, TrainReport};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RnnConfig {
    pub layers: usize,
    pub width: usize,
    pub embed_dim: usize,
    /// Truncation length for backpropagation through time.
    pub rho: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Parallel streams whose gradients are averaged per update.
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many updates, if set.
    pub max_steps: Option<usize>,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for RnnConfig {
    fn default() -> Self {
        RnnConfig {
            layers: 2,
            width: 64,
            embed_dim: 32,
            rho: 64,
            learning_rate: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 16,
            epochs: 1,
            max_steps: None,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl RnnConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("layers", self.layers),
            ("width", self.width),
            ("embedding dimension", self.embed_dim),
            ("batch size", self.batch_size),
            ("epochs", self.epochs),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.rho < 2 {
            return Err(Error::config(format!(
                "truncation length must be at least 2, got {}",
                self.rho
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 || self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return Err(Error::config("epsilon must be positive and the clip norm non-negative"));
        }
        Ok(())
    }
}
