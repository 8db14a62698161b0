//! Interpolated Kneser-Ney estimation with one absolute discount per order.
//!
//! Highest-order n-grams use their raw counts; lower orders use continuation
//! counts (the number of distinct tokens seen immediately to their left).
//! With `a(·)` the adjusted count, `D_k` the discount of order `k`, and `h'`
//! the history `h` without its oldest token:
//!
//! ```text
//! P(w | h) = (max(a(hw) - D_k, 0) + D_k · N(h) · P(w | h')) / A(h)
//! ```
//!
//! where `A(h) = Σ_x a(hx)` and `N(h)` is the number of distinct successors
//! of `h`. Unigrams interpolate with the uniform distribution over the known
//! characters. Unknown characters then receive a tenth of the smallest
//! unigram probability, and the known unigrams are scaled by the remainder
//! so that every distribution still sums to one.
//!
//! The result is stored in backoff form: a seen n-gram keeps its
//! interpolated probability, and a history keeps the weight that multiplies
//! the lower-order estimate for unseen successors. When pruning removed some
//! successors of a history, its weight is renormalised over what is left.

use crate::error::{Error, Result};
use crate::vocab::{Symbol, TokenId};

use super::counts::NgramCounts;
use super::model::NgramModel;
use super::trie::{Trie, ROOT};

/// Share of the smallest unigram probability given to unknown characters.
pub const UNK_FLOOR_FACTOR: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct KnParams {
    /// `discounts[k - 1]` is the discount for order `k`.
    pub discounts: Vec<f64>,
    /// `(n1, n2)` per order: how many n-grams have adjusted count 1 and 2.
    pub count_of_counts: Vec<(u64, u64)>,
}

/// `D = n1 / (n1 + 2 n2)`, with a fallback when there are no doubletons.
pub fn discount(n1: u64, n2: u64) -> f64 {
    let d = if n2 == 0 {
        n1 as f64 / (n1 as f64 + 2.0)
    } else {
        n1 as f64 / (n1 as f64 + 2.0 * n2 as f64)
    };
    d.clamp(0.0, 0.99)
}

/// Per-order minimum raw counts. Entry `k - 1` applies to order `k`;
/// unigrams are never pruned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PruneConfig {
    pub min_count: Vec<u64>,
}

impl PruneConfig {
    pub fn none(order: usize) -> Self {
        PruneConfig {
            min_count: vec![1; order],
        }
    }

    /// The same threshold for every order from 2 up.
    pub fn uniform(order: usize, min_count: u64) -> Self {
        let mut m = vec![min_count.max(1); order];
        m[0] = 1;
        PruneConfig { min_count: m }
    }

    /// Applies `min_count` to orders `from..=order` only.
    pub fn from_order(order: usize, from: usize, min_count: u64) -> Self {
        let min_count = (1..=order)
            .map(|k| if k >= from.max(2) { min_count.max(1) } else { 1 })
            .collect();
        PruneConfig { min_count }
    }

    fn validate(&self, order: usize) -> Result<()> {
        if self.min_count.len() != order {
            return Err(Error::config(format!(
                "prune config has {} thresholds for an order-{order} model",
                self.min_count.len()
            )));
        }
        if self.min_count[0] != 1 {
            return Err(Error::config("unigrams cannot be pruned (min_count[1] must be 1)"));
        }
        Ok(())
    }
}

/// Estimates a backoff model from counts.
pub fn estimate_kn(counts: &NgramCounts, prune: &PruneConfig) -> Result<NgramModel> {
    estimate_kn_with_params(counts, prune).map(|(m, _)| m)
}

pub fn estimate_kn_with_params(counts: &NgramCounts, prune: &PruneConfig) -> Result<(NgramModel, KnParams)> {
    let n = counts.order();
    prune.validate(n)?;
    let trie = &counts.trie;
    let nodes = trie.len();
    let vocab = counts.vocab().clone();

    let is_event = |g: usize| counts.count[g] > 0;
    let mut by_depth: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for g in 1..nodes as u32 {
        by_depth[trie.depth(g)].push(g);
    }

    let adjusted = |g: usize| -> u64 {
        if trie.depth(g as u32) == n {
            u64::from(counts.count[g])
        } else {
            u64::from(counts.extensions[g])
        }
    };

    let mut count_of_counts = Vec::with_capacity(n);
    let mut discounts = Vec::with_capacity(n);
    for bucket in &by_depth[1..] {
        let (mut n1, mut n2) = (0u64, 0u64);
        for &g in bucket.iter().filter(|&&g| is_event(g as usize)) {
            match adjusted(g as usize) {
                1 => n1 += 1,
                2 => n2 += 1,
                _ => {}
            }
        }
        count_of_counts.push((n1, n2));
        discounts.push(discount(n1, n2));
    }

    // pruning keeps the set closed under prefixes and suffixes
    let mut keep = vec![false; nodes];
    keep[ROOT as usize] = true;
    for &g in &counts.bos_chain {
        keep[g as usize] = true;
    }
    for (k, bucket) in by_depth.iter().enumerate().skip(1) {
        let mut survivors = 0usize;
        for &g in bucket {
            let gi = g as usize;
            if !is_event(gi) {
                continue;
            }
            keep[gi] = k == 1
                || (u64::from(counts.count[gi]) >= prune.min_count[k - 1]
                    && keep[trie.parent(g) as usize]
                    && keep[counts.prefix[gi] as usize]);
            survivors += usize::from(keep[gi]);
        }
        if survivors == 0 {
            return Err(Error::Training(format!("order {k} has no n-grams left after pruning")));
        }
    }

    // history totals over all (unpruned) successors
    let mut total = vec![0u64; nodes];
    let mut successors = vec![0u64; nodes];
    for g in 1..nodes {
        if is_event(g) {
            let h = counts.prefix[g] as usize;
            total[h] += adjusted(g);
            successors[h] += 1;
        }
    }

    let known: Vec<TokenId> = vocab
        .symbols()
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, Symbol::Char(_)))
        .map(|(i, _)| TokenId(i as u32))
        .collect();
    if known.is_empty() {
        return Err(Error::Training("no characters to estimate".into()));
    }

    let mut prob = vec![f64::NAN; nodes];
    let mut kept_mass = vec![0.0f64; nodes];
    let mut kept_lower = vec![0.0f64; nodes];
    let mut pruned_any = vec![false; nodes];

    // unigrams, including characters the counts never saw
    let d1 = discounts[0];
    let a_root = total[ROOT as usize] as f64;
    let n_root = successors[ROOT as usize] as f64;
    let uniform = 1.0 / known.len() as f64;
    let mut unigram = vec![0.0f64; vocab.len()];
    for &w in &known {
        let a = trie
            .child(ROOT, w.0)
            .filter(|&g| is_event(g as usize))
            .map(|g| adjusted(g as usize))
            .unwrap_or(0) as f64;
        unigram[w.index()] = ((a - d1).max(0.0) + d1 * n_root * uniform) / a_root;
    }
    let floor = UNK_FLOOR_FACTOR * known.iter().map(|w| unigram[w.index()]).fold(f64::INFINITY, f64::min);
    for &w in &known {
        unigram[w.index()] *= 1.0 - floor;
    }
    let unk = vocab.unk().expect("character vocabulary");
    unigram[unk.index()] = floor;

    for &g in &by_depth[1] {
        if is_event(g as usize) {
            prob[g as usize] = unigram[trie.token(g) as usize];
        }
    }

    for (k, bucket) in by_depth.iter().enumerate().skip(2) {
        let d = discounts[k - 1];
        for &g in bucket {
            let gi = g as usize;
            if !is_event(gi) {
                continue;
            }
            let h = counts.prefix[gi] as usize;
            if !keep[gi] {
                pruned_any[h] = true;
                continue;
            }
            let lower = prob[trie.parent(g) as usize];
            debug_assert!(!lower.is_nan());
            let a = adjusted(gi) as f64;
            let p = ((a - d).max(0.0) + d * successors[h] as f64 * lower) / total[h] as f64;
            prob[gi] = p;
            kept_mass[h] += p;
            kept_lower[h] += lower;
        }
    }

    let mut bow = vec![0.0f64; nodes];
    for g in 1..nodes {
        let depth = trie.depth(g as u32);
        if depth >= n || !keep[g] || total[g] == 0 {
            continue;
        }
        let d = discounts[depth];
        let weight = if pruned_any[g] {
            let num = (1.0 - kept_mass[g]).max(0.0);
            let den = 1.0 - kept_lower[g];
            if den > 0.0 {
                num / den
            } else {
                1.0
            }
        } else {
            d * successors[g] as f64 / total[g] as f64
        };
        bow[g] = weight.ln();
    }

    // copy the surviving nodes into a compact trie, shallow first
    let mut model_trie = Trie::new();
    let mut remap = vec![u32::MAX; nodes];
    remap[ROOT as usize] = ROOT;
    let mut out_prob = vec![f64::NAN];
    let mut out_bow = vec![0.0];
    for bucket in &by_depth[1..] {
        for &g in bucket {
            let gi = g as usize;
            if !keep[gi] {
                continue;
            }
            let parent = remap[trie.parent(g) as usize];
            debug_assert_ne!(parent, u32::MAX);
            let (id, _) = model_trie.child_or_insert(parent, trie.token(g));
            remap[gi] = id;
            out_prob.push(prob[gi].ln());
            out_bow.push(bow[gi]);
        }
    }
    // unigrams for characters absent from the counts, and UNK
    for w in known.iter().copied().chain(std::iter::once(unk)) {
        if model_trie.child(ROOT, w.0).is_none() {
            model_trie.child_or_insert(ROOT, w.0);
            out_prob.push(unigram[w.index()].ln());
            out_bow.push(0.0);
        }
    }
    model_trie.shrink_to_fit();

    let model = NgramModel::from_parts(n, vocab, model_trie, out_prob, out_bow);
    Ok((
        model,
        KnParams {
            discounts,
            count_of_counts,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::LanguageModel;

    #[test]
    fn discount_formula() {
        assert_eq!(discount(2, 1), 0.5);
        assert_eq!(discount(0, 3), 0.0);
        // no doubletons: n1 / (n1 + 2)
        assert_eq!(discount(2, 0), 0.5);
        assert_eq!(discount(1000, 0), 0.99);
    }

    #[test]
    fn unigrams_cannot_be_pruned() {
        let counts = NgramCounts::from_text(&["abab"], 2).unwrap();
        let bad = PruneConfig { min_count: vec![2, 1] };
        assert!(matches!(estimate_kn(&counts, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn pruning_everything_names_the_order() {
        let counts = NgramCounts::from_text(&["abab"], 3).unwrap();
        let err = estimate_kn(&counts, &PruneConfig::from_order(3, 3, 100)).unwrap_err();
        assert!(err.to_string().contains("order 3"), "{err}");
    }

    #[test]
    fn pruned_bigram_backs_off() {
        // "abab" twice: (a,b)=4, (b,a)=2, (BOS,a)=2
        let counts = NgramCounts::from_text(&["abab", "abab"], 2).unwrap();
        let model = estimate_kn(&counts, &PruneConfig::uniform(2, 3)).unwrap();
        let v = model.vocab().clone();
        let ab = v.tokenize("ab");
        let ba = v.tokenize("ba");
        assert!(model.stored_log_prob(&ab).is_some());
        assert!(model.stored_log_prob(&ba).is_none());
        let via_backoff = model.stored_backoff(&ba[..1]).unwrap() + model.stored_log_prob(&ba[1..]).unwrap();
        assert_eq!(model.log_prob(&ba[..1], ba[1]).unwrap(), via_backoff);
        for ctx in model.contexts() {
            let mass = model.context_mass(&ctx).unwrap();
            assert!((mass - 1.0).abs() < 1e-9, "{ctx:?}: {mass}");
        }
    }

    #[test]
    fn unk_gets_tenth_of_smallest_unigram() {
        let counts = NgramCounts::from_text(&["aab", "ab"], 2).unwrap();
        let model = estimate_kn(&counts, &PruneConfig::none(2)).unwrap();
        let v = model.vocab().clone();
        let unk = v.unk().unwrap();
        let a = v.tokenize("a");
        let b = v.tokenize("b");
        let pa = model.stored_log_prob(&a).unwrap().exp();
        let pb = model.stored_log_prob(&b).unwrap().exp();
        let pu = model.stored_log_prob(&[unk]).unwrap().exp();
        let floor = pu;
        assert!((pu - 0.1 * pa.min(pb) / (1.0 - floor)).abs() < 1e-12);
        assert!((pa + pb + pu - 1.0).abs() < 1e-12);
    }
}
