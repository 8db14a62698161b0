//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use beamseg::lm::sequence_score;
use beamseg::{LanguageModel, TokenId};

/// A history or event symbol: `None` is the BOS sentinel.
pub type Sym = Option<char>;

/// Brute-force interpolated Kneser-Ney with one discount per order,
/// computed from plain hash maps of n-gram counts.
pub struct KnOracle {
    order: usize,
    chars: Vec<char>,
    adjusted: Vec<HashMap<Vec<Sym>, u64>>,
    ctx_total: Vec<HashMap<Vec<Sym>, u64>>,
    ctx_types: Vec<HashMap<Vec<Sym>, u64>>,
    discounts: Vec<f64>,
    unk: f64,
}

impl KnOracle {
    pub fn new(lines: &[String], order: usize) -> Self {
        let mut raw: Vec<HashMap<Vec<Sym>, u64>> = vec![HashMap::new(); order + 1];
        let mut chars: Vec<char> = Vec::new();
        for line in lines {
            let mut padded: Vec<Sym> = vec![None; order - 1];
            padded.extend(line.chars().map(Some));
            chars.extend(line.chars());
            for i in order - 1..padded.len() {
                for k in 1..=order {
                    *raw[k].entry(padded[i + 1 - k..=i].to_vec()).or_default() += 1;
                }
            }
        }
        chars.sort();
        chars.dedup();

        let mut adjusted: Vec<HashMap<Vec<Sym>, u64>> = vec![HashMap::new(); order + 1];
        adjusted[order] = raw[order].clone();
        for k in 1..order {
            for g in raw[k].keys() {
                let ext = raw[k + 1].keys().filter(|x| &x[1..] == g.as_slice()).count() as u64;
                adjusted[k].insert(g.clone(), ext);
            }
        }

        let mut discounts = vec![0.0; order + 1];
        for k in 1..=order {
            let n1 = adjusted[k].values().filter(|&&c| c == 1).count() as f64;
            let n2 = adjusted[k].values().filter(|&&c| c == 2).count() as f64;
            let d = if n2 == 0.0 {
                n1 / (n1 + 2.0)
            } else {
                n1 / (n1 + 2.0 * n2)
            };
            discounts[k] = d.clamp(0.0, 0.99);
        }

        let mut ctx_total: Vec<HashMap<Vec<Sym>, u64>> = vec![HashMap::new(); order + 1];
        let mut ctx_types: Vec<HashMap<Vec<Sym>, u64>> = vec![HashMap::new(); order + 1];
        for k in 1..=order {
            for (g, &a) in &adjusted[k] {
                let h = g[..k - 1].to_vec();
                *ctx_total[k].entry(h.clone()).or_default() += a;
                *ctx_types[k].entry(h).or_default() += 1;
            }
        }

        let mut oracle = KnOracle {
            order,
            chars,
            adjusted,
            ctx_total,
            ctx_types,
            discounts,
            unk: 0.0,
        };
        let min = oracle
            .chars
            .iter()
            .map(|&c| oracle.base_unigram(c))
            .fold(f64::INFINITY, f64::min);
        oracle.unk = 0.1 * min;
        oracle
    }

    fn base_unigram(&self, c: char) -> f64 {
        let d = self.discounts[1];
        let a = self.adjusted[1].get(&vec![Some(c)]).copied().unwrap_or(0) as f64;
        let total = self.ctx_total[1][&Vec::new()] as f64;
        let types = self.ctx_types[1][&Vec::new()] as f64;
        ((a - d).max(0.0) + d * types / self.chars.len() as f64) / total
    }

    /// `P(w | h)` with `h` of length `k - 1`; `w = None` means UNK.
    fn p(&self, h: &[Sym], w: Option<char>) -> f64 {
        let k = h.len() + 1;
        if k == 1 {
            return match w {
                Some(c) if self.chars.contains(&c) => self.base_unigram(c) * (1.0 - self.unk),
                _ => self.unk,
            };
        }
        let lower = self.p(&h[1..], w);
        let Some(&total) = self.ctx_total[k].get(h) else {
            return lower;
        };
        let d = self.discounts[k];
        let mut g = h.to_vec();
        g.push(w);
        let a = match w {
            Some(_) => self.adjusted[k].get(&g).copied().unwrap_or(0) as f64,
            None => 0.0,
        };
        let types = self.ctx_types[k][h] as f64;
        ((a - d).max(0.0) + d * types * lower) / total as f64
    }

    /// `P(w | history)` for a history of known characters.
    pub fn prob(&self, history: &[char], w: Option<char>) -> f64 {
        let rho = self.order - 1;
        let mut h: Vec<Sym> = vec![None; rho];
        h.extend(history.iter().map(|&c| Some(c)));
        self.p(&h[h.len() - rho..], w)
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// The ranking key of a segmentation: boundary positions are indices into
/// the stripped input that a boundary precedes.
pub fn rank_key(score: f64, positions: &[u32]) -> impl Ord {
    (
        std::cmp::Reverse(OrdF64(score)),
        positions.len(),
        positions.last().copied(),
        positions.to_vec(),
    )
}

pub struct OrdF64(pub f64);
impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub fn render(chars: &[char], positions: &[u32], wb: char) -> String {
    let mut out = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if positions.contains(&(i as u32)) {
            out.push(wb);
        }
        out.push(c);
    }
    out
}

/// Every segmentation of `input` scored statelessly, ranked best first.
pub fn exhaustive<M: LanguageModel>(model: &M, input: &str, wb: char) -> Vec<(String, f64)> {
    let chars: Vec<char> = input.chars().collect();
    let l = chars.len();
    let mut all = Vec::with_capacity(1 << (l - 1));
    for mask in 0u32..(1 << (l - 1)) {
        let positions: Vec<u32> = (1..l as u32).filter(|p| mask & (1 << (p - 1)) != 0).collect();
        let text = render(&chars, &positions, wb);
        let tokens: Vec<TokenId> = model.vocab().tokenize(&text);
        let score = sequence_score(model, &tokens).unwrap();
        all.push((positions, text, score));
    }
    all.sort_by_cached_key(|(p, _, s)| rank_key(*s, p));
    all.into_iter().map(|(_, t, s)| (t, s)).collect()
}

/// Well-formed: no leading, trailing or doubled boundary.
pub fn well_formed(text: &str, wb: char) -> bool {
    let w = wb.to_string();
    !text.starts_with(wb) && !text.ends_with(wb) && !text.contains(&format!("{w}{w}"))
}
