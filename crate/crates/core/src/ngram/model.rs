use crate::error::{Error, Result};
use crate::lm::{LanguageModel, LogProbDist};
use crate::vocab::{TokenId, Vocabulary};

use super::trie::{Trie, ROOT};

/// Backoff n-gram model over characters.
///
/// Every stored n-gram keeps its natural-log probability (`NaN` for nodes
/// that only exist as context, such as the BOS chain) and, when it can serve
/// as history, a natural-log backoff weight (`0.0` when absent).
#[derive(Clone, Debug)]
pub struct NgramModel {
    pub(crate) order: usize,
    pub(crate) vocab: Vocabulary,
    pub(crate) trie: Trie,
    pub(crate) prob: Vec<f64>,
    pub(crate) bow: Vec<f64>,
    /// Node of `order - 1` BOS sentinels: the state of an empty history.
    pub(crate) start: u32,
}

/// Conditioning state of an [`NgramModel`]: the node of the longest stored
/// suffix of the history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NgramState(pub(crate) u32);

impl NgramModel {
    pub(crate) fn from_parts(order: usize, vocab: Vocabulary, trie: Trie, prob: Vec<f64>, bow: Vec<f64>) -> Self {
        let bos = vocab.bos().expect("n-gram vocabularies have BOS").0;
        let mut start = ROOT;
        for _ in 1..order {
            match trie.child(start, bos) {
                Some(n) => start = n,
                None => break,
            }
        }
        NgramModel {
            order,
            vocab,
            trie,
            prob,
            bow,
            start,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Stored entries per order, counting only nodes that carry a probability.
    pub fn ngram_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.order];
        for n in 1..self.trie.len() as u32 {
            if !self.prob[n as usize].is_nan() {
                out[self.trie.depth(n) - 1] += 1;
            }
        }
        out
    }

    pub fn total_ngrams(&self) -> usize {
        self.ngram_counts().iter().sum()
    }

    /// Stored probability of an n-gram (oldest token first), if present.
    pub fn stored_log_prob(&self, gram: &[TokenId]) -> Option<f64> {
        let ids: Vec<u32> = gram.iter().map(|t| t.0).collect();
        self.trie
            .find(&ids)
            .map(|n| self.prob[n as usize])
            .filter(|p| !p.is_nan())
    }

    pub fn stored_backoff(&self, context: &[TokenId]) -> Option<f64> {
        let ids: Vec<u32> = context.iter().map(|t| t.0).collect();
        self.trie.find(&ids).map(|n| self.bow[n as usize])
    }

    /// Every stored history (oldest token first) that has a backoff weight
    /// or predicts at least one stored n-gram, plus the empty history.
    pub fn contexts(&self) -> Vec<Vec<TokenId>> {
        let mut is_ctx = vec![false; self.trie.len()];
        is_ctx[ROOT as usize] = true;
        for n in 1..self.trie.len() as u32 {
            if self.trie.depth(n) < self.order && self.bow[n as usize] != 0.0 {
                is_ctx[n as usize] = true;
            }
        }
        // histories of stored n-grams
        for n in 1..self.trie.len() as u32 {
            if self.prob[n as usize].is_nan() || self.trie.depth(n) < 2 {
                continue;
            }
            let gram = self.trie.gram(n);
            if let Some(h) = self.trie.find(&gram[..gram.len() - 1]) {
                is_ctx[h as usize] = true;
            }
        }
        (0..self.trie.len() as u32)
            .filter(|&n| is_ctx[n as usize])
            .map(|n| self.trie.gram(n).into_iter().map(TokenId).collect())
            .collect()
    }

    /// Scores `token` after the history summarised by `ctx` and returns the
    /// state for the extended history.
    ///
    /// The probability comes from the longest stored n-gram ending in
    /// `token` whose history is a suffix of the context; every longer
    /// stored context that had to be skipped contributes its backoff weight.
    #[inline]
    pub(crate) fn score(&self, ctx: u32, token: u32) -> (f64, u32) {
        let mut chain = [ROOT; super::counts::MAX_ORDER];
        let depth = self.trie.depth(ctx);
        let mut node = ctx;
        for d in (1..=depth).rev() {
            chain[d] = node;
            node = self.trie.parent(node);
        }

        let mut best = None;
        let mut next_ctx = ROOT;
        let mut node = match self.trie.child(ROOT, token) {
            Some(n) => n,
            None => return (f64::NEG_INFINITY, ROOT),
        };
        let mut d = 1;
        loop {
            if !self.prob[node as usize].is_nan() {
                best = Some((node, d));
            }
            if d < self.order {
                next_ctx = node;
            }
            if d >= self.order || d > depth {
                break;
            }
            match self.trie.child(node, self.trie.token(chain[d])) {
                Some(n) => {
                    node = n;
                    d += 1;
                }
                None => break,
            }
        }

        let logp = match best {
            None => f64::NEG_INFINITY,
            Some((node, matched)) => {
                let mut lp = self.prob[node as usize];
                // contexts of length >= matched were backed off from
                for j in (matched..=depth).rev() {
                    lp += self.bow[chain[j] as usize];
                }
                lp
            }
        };
        (logp, next_ctx)
    }

    /// State for a history built directly by walking its reversed suffix,
    /// independently of [`LanguageModel::advance`].
    fn walk_history(&self, history: &[TokenId]) -> u32 {
        let rho = self.order - 1;
        let bos = self.vocab.bos().expect("n-gram vocabularies have BOS").0;
        let mut node = ROOT;
        for k in 1..=rho {
            let tok = if k <= history.len() {
                history[history.len() - k].0
            } else {
                bos
            };
            match self.trie.child(node, tok) {
                Some(n) => node = n,
                None => break,
            }
        }
        node
    }

    /// `Σ_w P(w | context)` over the whole vocabulary.
    pub fn context_mass(&self, context: &[TokenId]) -> Result<f64> {
        let d = self.next_log_probs(context)?;
        Ok(d.as_slice().iter().map(|lp| lp.exp()).sum())
    }

    pub(crate) fn trie(&self) -> &Trie {
        &self.trie
    }

    pub(crate) fn check_token(&self, token: TokenId) -> Result<()> {
        self.vocab
            .check(token)
            .map_err(|_| Error::input(format!("token {} is not in the model vocabulary", token.0)))
    }
}

impl LanguageModel for NgramModel {
    type State = NgramState;

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn context_len(&self) -> Option<usize> {
        Some(self.order - 1)
    }

    fn start_state(&self) -> NgramState {
        NgramState(self.start)
    }

    fn log_prob_at(&self, state: &NgramState, token: TokenId) -> f64 {
        self.score(state.0, token.0).0
    }

    fn advance(&self, state: &NgramState, token: TokenId) -> NgramState {
        NgramState(self.score(state.0, token.0).1)
    }

    fn step(&self, state: &NgramState, token: TokenId) -> (f64, NgramState) {
        let (lp, next) = self.score(state.0, token.0);
        (lp, NgramState(next))
    }

    fn dist_at(&self, state: &NgramState) -> LogProbDist {
        LogProbDist::new((0..self.vocab.len() as u32).map(|t| self.score(state.0, t).0).collect())
    }

    fn state_for(&self, history: &[TokenId]) -> Result<NgramState> {
        for &t in history {
            self.check_token(t)?;
        }
        Ok(NgramState(self.walk_history(history)))
    }
}
