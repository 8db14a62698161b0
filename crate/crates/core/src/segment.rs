//! Beam-search word segmentation.
//!
//! The input is first stripped of boundary symbols. The beam starts with
//! the first token; every following token extends each candidate as-is and,
//! when the language model finds it plausible enough, also with a boundary
//! inserted in front of it. After each token only the best `beam_width`
//! candidates survive, and the best `num_results` of the final beam are
//! returned.
//!
//! A candidate's score is the mean log-probability of its last `window`
//! tokens, boundary tokens included. A boundary is accepted when that score
//! for the extended candidate exceeds `-threshold`, so the threshold reads as
//! the largest tolerated mean negative log-probability (in nats).
//!
//! Ranking is fully deterministic: higher score first, then fewer
//! boundaries, then the earlier last boundary, then the boundary positions
//! compared lexicographically.

use std::cmp::Ordering;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::lm::{LanguageModel, Window};
use crate::vocab::{TokenId, TokenUnit};

#[derive(Clone, Debug, PartialEq)]
pub struct SegmenterConfig {
    /// Largest mean negative log-probability for which a boundary is still
    /// accepted. `f64::INFINITY` accepts every boundary.
    pub threshold: f64,
    pub beam_width: usize,
    pub num_results: usize,
    pub boundary: char,
    pub window: Window,
    /// Also remove every other whitespace character before segmenting.
    pub strip_whitespace: bool,
}

impl SegmenterConfig {
    /// Operating point tuned for the n-gram backend.
    pub fn ngram() -> Self {
        SegmenterConfig {
            threshold: 10.0,
            beam_width: 500,
            num_results: 1,
            boundary: ' ',
            window: Window::Unbounded,
            strip_whitespace: false,
        }
    }

    /// Operating point tuned for the recurrent backend.
    pub fn rnn() -> Self {
        SegmenterConfig {
            threshold: 8.0,
            beam_width: 10,
            num_results: 1,
            boundary: ' ',
            window: Window::Last(64.try_into().expect("nonzero")),
            strip_whitespace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::config(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.beam_width == 0 {
            return Err(Error::config("beam width must be at least 1"));
        }
        if self.num_results == 0 || self.num_results > self.beam_width {
            return Err(Error::config(format!(
                "number of results must be in 1..={}, got {}",
                self.beam_width, self.num_results
            )));
        }
        Ok(())
    }
}

/// Removes every boundary symbol (and, when `lenient`, every whitespace
/// character) from `text`.
pub fn strip_boundaries(text: &str, boundary: char, lenient: bool) -> String {
    text.chars()
        .filter(|&c| c != boundary && !(lenient && c.is_whitespace()))
        .collect()
}

#[derive(Debug)]
struct Link {
    token: TokenId,
    logp: f64,
    /// Unit index the boundary precedes, for boundary tokens.
    boundary_at: Option<u32>,
    prev: Option<Rc<Link>>,
}

/// A segmentation of the input consumed so far.
#[derive(Clone, Debug)]
pub struct Candidate<S> {
    tail: Rc<Link>,
    len: usize,
    sum: f64,
    score: f64,
    state: S,
    boundaries: u32,
    last_boundary: Option<u32>,
}

impl<S> Candidate<S> {
    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn state(&self) -> &S {
        &self.state
    }

    /// Number of tokens, boundaries included.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_boundaries(&self) -> u32 {
        self.boundaries
    }

    fn links(&self) -> impl Iterator<Item = &Link> {
        std::iter::successors(Some(&*self.tail), |l| l.prev.as_deref())
    }

    pub fn tokens(&self) -> Vec<TokenId> {
        let mut out: Vec<TokenId> = self.links().map(|l| l.token).collect();
        out.reverse();
        out
    }

    pub fn token_log_probs(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.links().map(|l| l.logp).collect();
        out.reverse();
        out
    }

    /// Unit indices that a boundary precedes, ascending.
    pub fn boundary_positions(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self.links().filter_map(|l| l.boundary_at).collect();
        out.reverse();
        out
    }
}

/// The ranking order: best candidate first.
pub fn rank<S>(a: &Candidate<S>, b: &Candidate<S>) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.boundaries.cmp(&b.boundaries))
        .then(a.last_boundary.cmp(&b.last_boundary))
        .then_with(|| a.boundary_positions().cmp(&b.boundary_positions()))
}

/// The `n` best candidates, best first.
pub fn top_n<S>(mut cands: Vec<Candidate<S>>, n: usize) -> Vec<Candidate<S>> {
    assert!(n >= 1, "top_n needs n >= 1");
    if cands.len() > n {
        cands.select_nth_unstable_by(n - 1, rank);
        cands.truncate(n);
    }
    cands.sort_by(rank);
    cands
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    pub text: String,
    pub score: f64,
}

/// One input position: the character and the tokens that encode it.
struct Unit {
    ch: char,
    tokens: Vec<TokenId>,
}

pub struct Segmenter<'m, M: LanguageModel> {
    model: &'m M,
    config: SegmenterConfig,
    boundary: TokenId,
}

impl<'m, M: LanguageModel> Segmenter<'m, M> {
    pub fn new(model: &'m M, config: SegmenterConfig) -> Result<Self> {
        config.validate()?;
        let boundary = model.vocab().single_token(config.boundary)?;
        Ok(Segmenter {
            model,
            config,
            boundary,
        })
    }

    pub fn config(&self) -> &SegmenterConfig {
        &self.config
    }

    pub fn model(&self) -> &M {
        self.model
    }

    pub fn boundary_token(&self) -> TokenId {
        self.boundary
    }

    fn windowed(&self, tail: &Link, len: usize, sum: f64) -> f64 {
        let span = self.config.window.span(len);
        if span == len {
            return sum / len as f64;
        }
        let mut buf = Vec::with_capacity(span);
        let mut link = Some(tail);
        while buf.len() < span {
            let l = link.expect("window never exceeds length");
            buf.push(l.logp);
            link = l.prev.as_deref();
        }
        let mut s = 0.0;
        for &lp in buf.iter().rev() {
            s += lp;
        }
        s / span as f64
    }

    fn push(
        &self,
        prev: Option<&Candidate<M::State>>,
        token: TokenId,
        logp: f64,
        state: M::State,
        boundary_at: Option<u32>,
    ) -> Candidate<M::State> {
        let (len, sum, tail, boundaries, last_boundary) = match prev {
            Some(c) => (
                c.len + 1,
                c.sum + logp,
                Some(c.tail.clone()),
                c.boundaries,
                c.last_boundary,
            ),
            None => (1, 0.0 + logp, None, 0, None),
        };
        let link = Rc::new(Link {
            token,
            logp,
            boundary_at,
            prev: tail,
        });
        let score = self.windowed(&link, len, sum);
        Candidate {
            tail: link,
            len,
            sum,
            score,
            state,
            boundaries: boundaries + u32::from(boundary_at.is_some()),
            last_boundary: boundary_at.or(last_boundary),
        }
    }

    /// Single-token candidate the beam starts from.
    pub fn bootstrap(&self, token: TokenId) -> Candidate<M::State> {
        let (lp, state) = self.model.step(&self.model.start_state(), token);
        self.push(None, token, lp, state, None)
    }

    /// `cand` extended by `token` without a boundary.
    pub fn extend(&self, cand: &Candidate<M::State>, token: TokenId) -> Candidate<M::State> {
        let (lp, state) = self.model.step(&cand.state, token);
        self.push(Some(cand), token, lp, state, None)
    }

    /// `cand` extended by a boundary and `token`, if the extended candidate
    /// scores above the threshold. `unit` is the input position `token`
    /// starts.
    pub fn bnd(&self, cand: &Candidate<M::State>, token: TokenId, unit: u32) -> Option<Candidate<M::State>> {
        let (lp_b, state_b) = self.model.step(&cand.state, self.boundary);
        let with_b = self.push(Some(cand), self.boundary, lp_b, state_b, Some(unit));
        let lp_c = self.model.log_prob_at(&with_b.state, token);
        let len = with_b.len + 1;
        let sum = with_b.sum + lp_c;
        let probe = Link {
            token,
            logp: lp_c,
            boundary_at: None,
            prev: Some(with_b.tail.clone()),
        };
        let score = self.windowed(&probe, len, sum);
        if self.config.threshold.is_infinite() || score > -self.config.threshold {
            let state = self.model.advance(&with_b.state, token);
            Some(self.push(Some(&with_b), token, lp_c, state, None))
        } else {
            None
        }
    }

    /// Every candidate extended by `token`, plus the boundary variants that
    /// pass the threshold when a boundary may precede `token`.
    pub fn xpd(
        &self,
        cands: &[Candidate<M::State>],
        token: TokenId,
        unit: u32,
        boundary_allowed: bool,
    ) -> Vec<Candidate<M::State>> {
        let mut out = Vec::with_capacity(cands.len() * 2);
        for cand in cands {
            out.push(self.extend(cand, token));
            if boundary_allowed {
                if let Some(b) = self.bnd(cand, token, unit) {
                    out.push(b);
                }
            }
        }
        out
    }

    pub fn beam_step(
        &self,
        beam: &[Candidate<M::State>],
        token: TokenId,
        unit: u32,
        boundary_allowed: bool,
    ) -> Vec<Candidate<M::State>> {
        top_n(self.xpd(beam, token, unit, boundary_allowed), self.config.beam_width)
    }

    fn units(&self, stripped: &str) -> Vec<Unit> {
        let vocab = self.model.vocab();
        stripped
            .chars()
            .map(|ch| {
                let mut tokens = Vec::with_capacity(1);
                vocab.encode_char(ch, &mut tokens);
                Unit { ch, tokens }
            })
            .collect()
    }

    /// Final beam for `text`, best first; empty when nothing is left to
    /// score after stripping.
    pub fn search(&self, text: &str) -> Vec<Candidate<M::State>> {
        let stripped = strip_boundaries(text, self.config.boundary, self.config.strip_whitespace);
        self.search_units(&self.units(&stripped))
    }

    fn search_units(&self, units: &[Unit]) -> Vec<Candidate<M::State>> {
        let mut beam: Vec<Candidate<M::State>> = Vec::new();
        for (u, unit) in units.iter().enumerate() {
            for (k, &token) in unit.tokens.iter().enumerate() {
                if beam.is_empty() {
                    beam.push(self.bootstrap(token));
                } else {
                    beam = self.beam_step(&beam, token, u as u32, k == 0);
                }
            }
        }
        beam
    }

    /// Up to `num_results` segmentations of `text`, best first.
    pub fn segment(&self, text: &str) -> Vec<Segmentation> {
        let stripped = strip_boundaries(text, self.config.boundary, self.config.strip_whitespace);
        let units = self.units(&stripped);
        let beam = self.search_units(&units);
        if beam.is_empty() {
            return vec![Segmentation {
                text: stripped,
                score: 0.0,
            }];
        }
        top_n(beam, self.config.num_results)
            .iter()
            .map(|c| Segmentation {
                text: render(&units, &c.boundary_positions(), self.config.boundary),
                score: c.score,
            })
            .collect()
    }
}

fn render(units: &[Unit], boundaries: &[u32], wb: char) -> String {
    let mut out = String::with_capacity(units.len() + boundaries.len());
    let mut next = boundaries.iter().peekable();
    for (i, unit) in units.iter().enumerate() {
        if next.peek().is_some_and(|&&b| b as usize == i) {
            out.push(wb);
            next.next();
        }
        out.push(unit.ch);
    }
    out
}

/// Segments one line; `result[0]` is the best segmentation.
pub fn segment_line<M: LanguageModel>(text: &str, model: &M, config: &SegmenterConfig) -> Result<Vec<Segmentation>> {
    Ok(Segmenter::new(model, config.clone())?.segment(text))
}

/// Whether a boundary may be placed before a unit in this vocabulary.
pub fn splits_inside_chars(unit: TokenUnit) -> bool {
    matches!(unit, TokenUnit::Char)
}
