//! Character-level backoff n-gram language model with interpolated
//! Kneser-Ney smoothing.

mod arpa;
mod counts;
mod estimate;
mod model;
mod trie;

pub use arpa::{load_arpa, read_arpa, save_arpa, write_arpa};
pub use counts::{count_ngrams, NgramCounts, MAX_ORDER};
pub use estimate::{discount, estimate_kn, estimate_kn_with_params, KnParams, PruneConfig, UNK_FLOOR_FACTOR};
pub use model::{NgramModel, NgramState};

use crate::error::Result;

/// Counts `lines` and estimates an order-`order` model in one go.
pub fn train<S: AsRef<str>>(lines: &[S], order: usize, prune: &PruneConfig) -> Result<NgramModel> {
    let counts = NgramCounts::from_text(lines, order)?;
    estimate_kn(&counts, prune)
}
