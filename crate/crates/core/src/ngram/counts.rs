use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary};

use super::trie::{Trie, ROOT};

/// Largest supported n-gram order.
pub const MAX_ORDER: usize = 32;

/// Raw n-gram counts for orders `1..=order` over BOS-padded lines.
///
/// Each line is preceded by `order - 1` BOS sentinels. BOS only ever appears
/// as history: every counted n-gram ends in a real token.
#[derive(Clone, Debug)]
pub struct NgramCounts {
    order: usize,
    vocab: Vocabulary,
    pub(crate) trie: Trie,
    /// Occurrences of each node as an n-gram; zero for the BOS-only chain.
    pub(crate) count: Vec<u32>,
    /// Node of the n-gram with the newest token dropped.
    pub(crate) prefix: Vec<u32>,
    /// Number of distinct left extensions.
    pub(crate) extensions: Vec<u32>,
    /// `bos_chain[j]` is the node for `j + 1` BOS sentinels.
    pub(crate) bos_chain: Vec<u32>,
}

impl NgramCounts {
    pub fn new(vocab: Vocabulary, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::config(format!("n-gram order must be at least 2, got {order}")));
        }
        if order > MAX_ORDER {
            return Err(Error::config(format!("n-gram order {order} exceeds {MAX_ORDER}")));
        }
        let bos = vocab
            .bos()
            .ok_or_else(|| Error::config("n-gram models need a character vocabulary"))?;
        let mut counts = NgramCounts {
            order,
            vocab,
            trie: Trie::new(),
            count: vec![0],
            prefix: vec![ROOT],
            extensions: vec![0],
            bos_chain: Vec::with_capacity(order - 1),
        };
        let mut node = ROOT;
        for _ in 1..order {
            let (next, _) = counts.trie.child_or_insert(node, bos.0);
            counts.count.push(0);
            counts.prefix.push(node);
            counts.extensions.push(0);
            counts.extensions[node as usize] += 1;
            counts.bos_chain.push(next);
            node = next;
        }
        Ok(counts)
    }

    /// Counts every line of `lines`, building the vocabulary from the
    /// characters that occur in them.
    pub fn from_text<S: AsRef<str>>(lines: &[S], order: usize) -> Result<Self> {
        let vocab = Vocabulary::characters(lines.iter().flat_map(|l| l.as_ref().chars()));
        let mut counts = NgramCounts::new(vocab, order)?;
        let mut buf = Vec::new();
        for line in lines {
            buf.clear();
            for c in line.as_ref().chars() {
                counts.vocab.encode_char(c, &mut buf);
            }
            counts.add_line(&buf)?;
        }
        counts.shrink_to_fit();
        Ok(counts)
    }

    pub fn add_line(&mut self, tokens: &[TokenId]) -> Result<()> {
        let bos = self.vocab.bos().expect("checked in new");
        for &t in tokens {
            self.vocab.check(t)?;
            if t == bos {
                return Err(Error::input("BOS cannot occur inside a line"));
            }
        }
        let n = self.order;
        // depth-d nodes of the walk at the previous position
        let mut prev: Vec<u32> = std::iter::once(ROOT)
            .chain(self.bos_chain.iter().copied())
            .chain(std::iter::once(ROOT))
            .collect();
        let mut cur = vec![ROOT; n + 1];
        for i in 0..tokens.len() {
            let mut node = ROOT;
            for k in 1..=n {
                let tok = if k <= i + 1 { tokens[i + 1 - k].0 } else { bos.0 };
                let (next, created) = self.trie.child_or_insert(node, tok);
                if created {
                    self.count.push(0);
                    self.prefix.push(prev[k - 1]);
                    self.extensions.push(0);
                    self.extensions[node as usize] += 1;
                }
                self.count[next as usize] += 1;
                cur[k] = next;
                node = next;
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        Ok(())
    }

    fn shrink_to_fit(&mut self) {
        self.trie.shrink_to_fit();
        self.count.shrink_to_fit();
        self.prefix.shrink_to_fit();
        self.extensions.shrink_to_fit();
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Occurrences of `gram` (oldest token first).
    pub fn count(&self, gram: &[TokenId]) -> u64 {
        let ids: Vec<u32> = gram.iter().map(|t| t.0).collect();
        self.trie
            .find(&ids)
            .map(|n| u64::from(self.count[n as usize]))
            .unwrap_or(0)
    }

    /// All counted n-grams of length `k` with their counts, in storage order.
    pub fn ngrams(&self, k: usize) -> Vec<(Vec<TokenId>, u64)> {
        (1..self.trie.len() as u32)
            .filter(|&n| self.trie.depth(n) == k && self.count[n as usize] > 0)
            .map(|n| {
                let gram = self.trie.gram(n).into_iter().map(TokenId).collect();
                (gram, u64::from(self.count[n as usize]))
            })
            .collect()
    }

    /// Number of distinct n-grams of length `k`.
    pub fn distinct(&self, k: usize) -> usize {
        (1..self.trie.len() as u32)
            .filter(|&n| self.trie.depth(n) == k && self.count[n as usize] > 0)
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.count.iter().all(|&c| c == 0)
    }
}

/// Counts n-grams of every order up to `order` in tokenized lines.
pub fn count_ngrams(vocab: Vocabulary, lines: &[Vec<TokenId>], order: usize) -> Result<NgramCounts> {
    let mut counts = NgramCounts::new(vocab, order)?;
    for line in lines {
        counts.add_line(line)?;
    }
    counts.shrink_to_fit();
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::Symbol;

    fn ids(v: &Vocabulary, s: &str) -> Vec<TokenId> {
        v.tokenize(s)
    }

    #[test]
    fn counts_ab_bigram() {
        let c = NgramCounts::from_text(&["ab"], 2).unwrap();
        let v = c.vocab().clone();
        let bos = v.bos().unwrap();
        let (a, b) = (ids(&v, "a")[0], ids(&v, "b")[0]);
        assert_eq!(c.count(&[a]), 1);
        assert_eq!(c.count(&[b]), 1);
        assert_eq!(c.count(&[bos, a]), 1);
        assert_eq!(c.count(&[a, b]), 1);
        assert_eq!(c.distinct(1), 2);
        assert_eq!(c.distinct(2), 2);
        // BOS is never an event
        assert_eq!(c.count(&[bos]), 0);
    }

    #[test]
    fn counts_repeated_lines() {
        let c = NgramCounts::from_text(&["aa", "aa"], 2).unwrap();
        let v = c.vocab().clone();
        let a = v.id(Symbol::Char('a')).unwrap();
        let bos = v.bos().unwrap();
        assert_eq!(c.count(&[a]), 4);
        assert_eq!(c.count(&[a, a]), 2);
        assert_eq!(c.count(&[bos, a]), 2);
    }

    #[test]
    fn empty_corpus_has_no_events() {
        let c = NgramCounts::from_text::<&str>(&[], 3).unwrap();
        assert!(c.is_empty());
        for k in 1..=3 {
            assert!(c.ngrams(k).is_empty());
        }
    }

    #[test]
    fn order_below_two_is_rejected() {
        assert!(matches!(NgramCounts::from_text(&["ab"], 1), Err(Error::Config(_))));
    }

    #[test]
    fn short_lines_are_padded() {
        // order 4, one-character line: (BOS,BOS,BOS,x) is counted
        let c = NgramCounts::from_text(&["x"], 4).unwrap();
        let v = c.vocab().clone();
        let bos = v.bos().unwrap();
        let x = ids(&v, "x")[0];
        assert_eq!(c.count(&[bos, bos, bos, x]), 1);
        assert_eq!(c.count(&[bos, bos, x]), 1);
        assert_eq!(c.ngrams(4).len(), 1);
    }

    #[test]
    fn prefixes_and_extensions() {
        let c = NgramCounts::from_text(&["abcab", "cab"], 3).unwrap();
        for k in 2..=3 {
            for (gram, _) in c.ngrams(k) {
                let node = c.trie.find(&gram.iter().map(|t| t.0).collect::<Vec<_>>()).unwrap();
                let prefix = c.prefix[node as usize];
                let expect: Vec<u32> = gram[..k - 1].iter().map(|t| t.0).collect();
                assert_eq!(c.trie.gram(prefix), expect);
            }
        }
        let v = c.vocab().clone();
        let bos = v.bos().unwrap();
        let ab = ids(&v, "ab");
        // left extensions of "ab": "cab" (twice) and BOS-"ab"
        assert_eq!(c.count(&[ids(&v, "c")[0], ab[0], ab[1]]), 2);
        assert_eq!(c.count(&[bos, ab[0], ab[1]]), 1);
        let node = c.trie.find(&[ab[0].0, ab[1].0]).unwrap();
        assert_eq!(c.extensions[node as usize], 2);
    }
}
