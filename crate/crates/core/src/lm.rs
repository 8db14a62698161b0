//! The scoring contract shared by every language-model backend.
//!
//! A model maps a history of token ids to a distribution over the next
//! token. Histories are truncated to the model's context length and padded
//! on the left with the vocabulary's context pad (BOS or the null byte).
//! All log-probabilities are natural logs.
//!
//! Backends also expose an incremental form through [`LanguageModel::State`]
//! so that the segmenter can extend candidates one token at a time; folding
//! [`LanguageModel::advance`] over a history must reach the same state that
//! [`LanguageModel::state_for`] builds from scratch.

use std::fmt;
use std::num::NonZeroUsize;

use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary};

/// Log-probabilities over a whole vocabulary, indexed by token id.
#[derive(Clone, Debug, PartialEq)]
pub struct LogProbDist(Vec<f64>);

impl LogProbDist {
    pub fn new(logp: Vec<f64>) -> Self {
        LogProbDist(logp)
    }

    pub fn get(&self, id: TokenId) -> f64 {
        self.0[id.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn log_sum_exp(&self) -> f64 {
        log_sum_exp(&self.0)
    }

    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        TokenId(best as u32)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// How many trailing tokens are averaged when scoring a sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Window {
    Unbounded,
    Last(NonZeroUsize),
}

impl Window {
    pub fn new(win: usize) -> Result<Self> {
        NonZeroUsize::new(win)
            .map(Window::Last)
            .ok_or_else(|| Error::input("window length must be at least 1"))
    }

    /// Number of trailing terms averaged for a sequence of `len` tokens.
    #[inline]
    pub fn span(self, len: usize) -> usize {
        match self {
            Window::Unbounded => len,
            Window::Last(w) => w.get().min(len),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Unbounded => f.write_str("inf"),
            Window::Last(w) => write!(f, "{w}"),
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "unbounded" | "∞" => Ok(Window::Unbounded),
            other => other
                .parse::<usize>()
                .map_err(|_| Error::input(format!("bad window {other:?}")))
                .and_then(Window::new),
        }
    }
}

pub trait LanguageModel {
    /// Conditioning state after some history has been consumed.
    type State: Clone;

    fn vocab(&self) -> &Vocabulary;

    /// History length the model conditions on; `None` when unbounded.
    fn context_len(&self) -> Option<usize>;

    /// State for an empty history.
    fn start_state(&self) -> Self::State;

    /// `ln P(token | state)`.
    fn log_prob_at(&self, state: &Self::State, token: TokenId) -> f64;

    fn advance(&self, state: &Self::State, token: TokenId) -> Self::State;

    fn dist_at(&self, state: &Self::State) -> LogProbDist;

    /// Scores `token` and consumes it in one go.
    fn step(&self, state: &Self::State, token: TokenId) -> (f64, Self::State) {
        (self.log_prob_at(state, token), self.advance(state, token))
    }

    /// State reached from scratch for `history`, keeping at most
    /// `context_len` trailing tokens.
    fn state_for(&self, history: &[TokenId]) -> Result<Self::State> {
        for &id in history {
            self.vocab().check(id)?;
        }
        let start = match self.context_len() {
            Some(rho) => history.len().saturating_sub(rho),
            None => 0,
        };
        Ok(history[start..]
            .iter()
            .fold(self.start_state(), |s, &t| self.advance(&s, t)))
    }

    fn next_log_probs(&self, history: &[TokenId]) -> Result<LogProbDist> {
        Ok(self.dist_at(&self.state_for(history)?))
    }

    fn log_prob(&self, history: &[TokenId], token: TokenId) -> Result<f64> {
        self.vocab().check(token)?;
        Ok(self.log_prob_at(&self.state_for(history)?, token))
    }
}

/// Per-token conditional log-probabilities, each computed from its own
/// truncated history with a fresh state.
pub fn token_log_probs<M: LanguageModel + ?Sized>(model: &M, tokens: &[TokenId]) -> Result<Vec<f64>> {
    (0..tokens.len())
        .map(|i| model.log_prob(&tokens[..i], tokens[i]))
        .collect()
}

/// Mean of the last `span` entries, summed left to right.
pub fn tail_mean(logps: &[f64], span: usize) -> f64 {
    let tail = &logps[logps.len() - span..];
    let mut sum = 0.0;
    for &lp in tail {
        sum += lp;
    }
    sum / span as f64
}

/// Mean per-token log-probability of a sequence.
pub fn sequence_score<M: LanguageModel + ?Sized>(model: &M, tokens: &[TokenId]) -> Result<f64> {
    windowed_score(model, tokens, Window::Unbounded)
}

/// Mean log-probability of the last `win` tokens, each conditioned on its
/// full preceding context.
pub fn windowed_score<M: LanguageModel + ?Sized>(model: &M, tokens: &[TokenId], win: Window) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::input("cannot score an empty sequence"));
    }
    let logps = token_log_probs(model, tokens)?;
    Ok(tail_mean(&logps, win.span(tokens.len())))
}

/// Mean negative log-probability (nats per token) of every token of every
/// line, each line scored from the start state.
pub fn cross_entropy<M: LanguageModel + ?Sized, S: AsRef<str>>(model: &M, lines: &[S]) -> Result<f64> {
    let (mut total, mut n) = (0.0, 0usize);
    for line in lines {
        let mut state = model.start_state();
        for t in model.vocab().tokenize(line.as_ref()) {
            let (lp, next) = model.step(&state, t);
            total -= lp;
            n += 1;
            state = next;
        }
    }
    if n == 0 {
        return Err(Error::input("no tokens to score"));
    }
    Ok(total / n as f64)
}

/// Small reference models, handy for tests and examples.
pub mod stub {
    use rustc_hash::FxHashMap;

    use super::*;

    /// Assigns every predictable token the same probability.
    #[derive(Clone, Debug)]
    pub struct Uniform {
        vocab: Vocabulary,
    }

    impl Uniform {
        pub fn new(vocab: Vocabulary) -> Self {
            Uniform { vocab }
        }

        fn logp(&self) -> f64 {
            -(self.vocab.predictable().count() as f64).ln()
        }
    }

    impl LanguageModel for Uniform {
        type State = ();

        fn vocab(&self) -> &Vocabulary {
            &self.vocab
        }

        fn context_len(&self) -> Option<usize> {
            Some(1)
        }

        fn start_state(&self) {}

        fn log_prob_at(&self, _: &(), token: TokenId) -> f64 {
            if Some(token) == self.vocab.bos() {
                f64::NEG_INFINITY
            } else {
                self.logp()
            }
        }

        fn advance(&self, _: &(), _: TokenId) {}

        fn dist_at(&self, state: &()) -> LogProbDist {
            LogProbDist::new(
                (0..self.vocab.len() as u32)
                    .map(|i| self.log_prob_at(state, TokenId(i)))
                    .collect(),
            )
        }
    }

    /// Unsmoothed bigram model estimated from raw counts. Contexts that were
    /// never seen fall back to a uniform distribution.
    #[derive(Clone, Debug)]
    pub struct CountBigram {
        vocab: Vocabulary,
        counts: FxHashMap<(TokenId, TokenId), u64>,
        totals: FxHashMap<TokenId, u64>,
    }

    impl CountBigram {
        pub fn train<'a, I: IntoIterator<Item = &'a str>>(vocab: Vocabulary, lines: I) -> Self {
            let mut counts = FxHashMap::default();
            let mut totals = FxHashMap::default();
            let pad = vocab.context_pad();
            for line in lines {
                let mut prev = pad;
                for t in vocab.tokenize(line) {
                    *counts.entry((prev, t)).or_insert(0) += 1;
                    *totals.entry(prev).or_insert(0) += 1;
                    prev = t;
                }
            }
            CountBigram { vocab, counts, totals }
        }
    }

    impl LanguageModel for CountBigram {
        type State = TokenId;

        fn vocab(&self) -> &Vocabulary {
            &self.vocab
        }

        fn context_len(&self) -> Option<usize> {
            Some(1)
        }

        fn start_state(&self) -> TokenId {
            self.vocab.context_pad()
        }

        fn log_prob_at(&self, prev: &TokenId, token: TokenId) -> f64 {
            if Some(token) == self.vocab.bos() {
                return f64::NEG_INFINITY;
            }
            match self.totals.get(prev) {
                Some(&total) => {
                    let c = self.counts.get(&(*prev, token)).copied().unwrap_or(0);
                    (c as f64 / total as f64).ln()
                }
                None => -(self.vocab.predictable().count() as f64).ln(),
            }
        }

        fn advance(&self, _: &TokenId, token: TokenId) -> TokenId {
            token
        }

        fn dist_at(&self, state: &TokenId) -> LogProbDist {
            LogProbDist::new(
                (0..self.vocab.len() as u32)
                    .map(|i| self.log_prob_at(state, TokenId(i)))
                    .collect(),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::stub::{CountBigram, Uniform};
    use super::*;
    use crate::vocab::Symbol;

    fn byte_uniform4() -> Uniform {
        // BOS + UNK + three characters: four predictable symbols
        Uniform::new(Vocabulary::characters("abc".chars()))
    }

    fn abab() -> CountBigram {
        CountBigram::train(Vocabulary::characters("ab".chars()), ["abab"])
    }

    #[test]
    fn uniform_is_flat() {
        let m = byte_uniform4();
        let v = m.vocab().clone();
        let hist = v.tokenize("abca");
        let d = m.next_log_probs(&hist).unwrap();
        for id in v.predictable() {
            assert_eq!(d.get(id), (0.25f64).ln());
        }
        assert!(d.log_sum_exp().abs() < 1e-12);
    }

    #[test]
    fn bigram_stub_after_a() {
        let m = abab();
        let v = m.vocab();
        let a = v.id(Symbol::Char('a')).unwrap();
        let b = v.id(Symbol::Char('b')).unwrap();
        let d = m.next_log_probs(&[a]).unwrap();
        assert_eq!(d.get(b), 0.0);
        for id in v.predictable().filter(|&id| id != b) {
            assert_eq!(d.get(id), f64::NEG_INFINITY);
        }
        assert!(d.log_sum_exp().abs() < 1e-12);
    }

    #[test]
    fn invalid_token_is_rejected() {
        let m = abab();
        assert!(matches!(m.next_log_probs(&[TokenId(99)]), Err(Error::Input(_))));
        assert!(m.log_prob(&[], TokenId(99)).is_err());
    }

    #[test]
    fn sequence_score_uniform() {
        let m = byte_uniform4();
        let v = m.vocab().clone();
        for text in ["a", "abc", "cccccccc"] {
            let s = sequence_score(&m, &v.tokenize(text)).unwrap();
            assert!((s - (0.25f64).ln()).abs() < 1e-15);
        }
        assert!(sequence_score(&m, &[]).is_err());
    }

    #[test]
    fn sequence_score_bigram_by_hand() {
        // counts from "abab": BOS->a 1, a->b 2, b->a 1
        // P(a|BOS)=1, P(b|a)=1, P(a|b)=1, P(b|a)=1 → every term is ln 1
        let m = abab();
        let v = m.vocab().clone();
        assert_eq!(sequence_score(&m, &v.tokenize("abab")).unwrap(), 0.0);
        // "abba": P(b|b) is zero
        assert_eq!(sequence_score(&m, &v.tokenize("abba")).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn windowed_score_cases() {
        let m = byte_uniform4();
        let v = m.vocab().clone();
        let toks = v.tokenize("abcab");
        let full = sequence_score(&m, &toks).unwrap();
        assert_eq!(windowed_score(&m, &toks, Window::new(5).unwrap()).unwrap(), full);
        assert_eq!(windowed_score(&m, &toks, Window::new(50).unwrap()).unwrap(), full);
        assert_eq!(windowed_score(&m, &toks, Window::Unbounded).unwrap(), full);
        assert!(Window::new(0).is_err());

        let bi = abab();
        let toks = bi.vocab().tokenize("abab");
        let last = bi.log_prob(&toks[..3], toks[3]).unwrap();
        assert_eq!(windowed_score(&bi, &toks, Window::new(1).unwrap()).unwrap(), last);
        // last two conditionals P(a|b)=1, P(b|a)=1
        assert_eq!(windowed_score(&bi, &toks, Window::new(2).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn window_parses() {
        assert_eq!("inf".parse::<Window>().unwrap(), Window::Unbounded);
        assert_eq!("64".parse::<Window>().unwrap(), Window::new(64).unwrap());
        assert!("0".parse::<Window>().is_err());
    }
}
