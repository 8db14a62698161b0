//! Word segmentation for text with missing or misplaced word boundaries.
//!
//! The segmenter scans boundary-free text one token at a time, keeping a
//! beam of partial segmentations scored by a token-level language model.
//! Two backends are provided: a character n-gram model with Kneser-Ney
//! smoothing ([`ngram`]) and a byte-level LSTM ([`rnn`]).

pub mod corpus;
pub mod error;
pub mod eval;
pub mod lm;
pub mod ngram;
pub mod rnn;
pub mod segment;
pub mod tune;
pub mod vocab;

pub use error::{Error, Result};
pub use lm::{cross_entropy, sequence_score, windowed_score, LanguageModel, LogProbDist, Window};
pub use vocab::{Symbol, TokenId, TokenUnit, Vocabulary};
