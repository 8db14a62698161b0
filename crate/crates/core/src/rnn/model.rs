use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lm::{LanguageModel, LogProbDist};
use crate::vocab::{TokenId, Vocabulary};

use super::net::{self, Layout};
use super::RnnConfig;

/// Maps bytes to dense ids, dropping the control bytes 1..=31.
pub fn byte_tokenize(bytes: &[u8]) -> Vec<TokenId> {
    bytes
        .iter()
        .filter_map(|&b| match b {
            0 => Some(TokenId(0)),
            1..=31 => None,
            _ => Some(TokenId(u32::from(b) - 31)),
        })
        .collect()
}

/// Recurrent state after some history, with the next-token distribution
/// already computed.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnState {
    hc: Vec<f32>,
    logp: Arc<Vec<f64>>,
}

impl RnnState {
    /// `h` then `c` for each layer, bottom layer first.
    pub fn hidden(&self) -> &[f32] {
        &self.hc
    }
}

#[derive(Clone, Debug)]
pub struct RnnModel {
    pub(crate) config: RnnConfig,
    pub(crate) layout: Layout,
    pub(crate) params: Vec<f32>,
    vocab: Vocabulary,
    start: RnnState,
    pub(crate) validation_loss: Option<f64>,
}

impl RnnModel {
    pub(crate) fn from_params(config: RnnConfig, params: Vec<f32>) -> Result<Self> {
        config.validate()?;
        let vocab = Vocabulary::bytes();
        let layout = Layout::new(&config, vocab.len());
        if params.len() != layout.total() {
            return Err(Error::Load(format!(
                "expected {} parameters for this configuration, found {}",
                layout.total(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Load("parameters contain non-finite values".into()));
        }
        let mut model = RnnModel {
            config,
            layout,
            params,
            vocab,
            start: RnnState {
                hc: Vec::new(),
                logp: Arc::new(Vec::new()),
            },
            validation_loss: None,
        };
        let zero = vec![0.0; model.layout.state_len()];
        model.start = model.feed(zero, model.pad_index());
        Ok(model)
    }

    /// Randomly initialised model: weights uniform in ±1/sqrt(fan-in),
    /// forget-gate biases +1, other biases zero.
    pub fn new(config: RnnConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config, Vocabulary::bytes().len());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut p = vec![0.0f32; layout.total()];
        let mut fill = |p: &mut [f32], fan_in: usize| {
            let a = 1.0 / (fan_in as f32).sqrt();
            let d = Uniform::new_inclusive(-a, a);
            p.iter_mut().for_each(|v| *v = d.sample(&mut rng));
        };
        // a lookup row is selected by a one-hot input: fan-in 1
        fill(&mut p[layout.embedding()], 1);
        for l in 0..layout.layers {
            fill(&mut p[layout.w(l)], layout.input_dim(l));
            fill(&mut p[layout.u(l)], layout.width);
            let b = layout.b(l);
            p[b.start + layout.width..b.start + 2 * layout.width].fill(1.0);
        }
        fill(&mut p[layout.out_w()], layout.width);
        RnnModel::from_params(config, p)
    }

    /// Model with every parameter zero.
    pub fn zeros(config: RnnConfig) -> Result<Self> {
        let layout = Layout::new(&config, Vocabulary::bytes().len());
        RnnModel::from_params(config, vec![0.0; layout.total()])
    }

    pub fn config(&self) -> &RnnConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    /// Validation loss recorded with the model, in nats per byte.
    pub fn validation_loss(&self) -> Option<f64> {
        self.validation_loss
    }

    pub fn set_validation_loss(&mut self, loss: Option<f64>) {
        self.validation_loss = loss;
    }

    fn pad_index(&self) -> usize {
        self.vocab.pad().expect("byte vocabulary").index()
    }

    fn feed(&self, mut hc: Vec<f32>, token: usize) -> RnnState {
        if token == self.pad_index() {
            hc.iter_mut().for_each(|v| *v = 0.0);
        }
        net::step(&self.layout, &self.params, &mut hc, token);
        let mut z = vec![0.0f32; self.layout.vocab];
        net::logits(&self.layout, &self.params, &hc, &mut z);
        let mut logp: Vec<f64> = z.iter().map(|&v| f64::from(v)).collect();
        net::log_softmax(&mut logp);
        RnnState {
            hc,
            logp: Arc::new(logp),
        }
    }

    /// Consumes `token` and returns the next-token distribution.
    pub fn forward_step(&self, state: &RnnState, token: TokenId) -> Result<(RnnState, LogProbDist)> {
        self.vocab.check(token)?;
        if state.hc.len() != self.layout.state_len() {
            return Err(Error::input(format!(
                "state has {} values, model expects {}",
                state.hc.len(),
                self.layout.state_len()
            )));
        }
        let next = self.feed(state.hc.clone(), token.index());
        let dist = LogProbDist::new(next.logp.to_vec());
        Ok((next, dist))
    }

    /// Mean next-byte cross-entropy (nats) over `PAD line` streams,
    /// predicting every byte of every line.
    pub fn cross_entropy<S: AsRef<str>>(&self, lines: &[S]) -> Result<f64> {
        crate::lm::cross_entropy(self, lines)
    }

    /// Fraction of positions whose most likely next byte is the actual one,
    /// over `PAD line` streams.
    pub fn next_byte_accuracy<S: AsRef<str>>(&self, lines: &[S]) -> Result<f64> {
        let (mut hits, mut n) = (0usize, 0usize);
        for line in lines {
            let mut state = self.start.clone();
            for t in byte_tokenize(line.as_ref().as_bytes()) {
                if LogProbDist::new(state.logp.to_vec()).argmax() == t {
                    hits += 1;
                }
                n += 1;
                state = self.feed(state.hc, t.index());
            }
        }
        if n == 0 {
            return Err(Error::input("no bytes to score"));
        }
        Ok(hits as f64 / n as f64)
    }
}

impl LanguageModel for RnnModel {
    type State = RnnState;

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn context_len(&self) -> Option<usize> {
        None
    }

    fn start_state(&self) -> RnnState {
        self.start.clone()
    }

    fn log_prob_at(&self, state: &RnnState, token: TokenId) -> f64 {
        state.logp[token.index()]
    }

    fn advance(&self, state: &RnnState, token: TokenId) -> RnnState {
        self.feed(state.hc.clone(), token.index())
    }

    fn dist_at(&self, state: &RnnState) -> LogProbDist {
        LogProbDist::new(state.logp.to_vec())
    }
}
