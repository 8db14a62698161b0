//! Reading and writing models in the ARPA backoff format.
//!
//! Probabilities and weights are stored as base-10 logs and converted to
//! natural logs on load. Tokens are single characters; a handful of them
//! need escaping because grams are space-separated:
//!
//! | token       | written as |
//! |-------------|------------|
//! | BOS         | `<s>`      |
//! | unknown     | `<unk>`    |
//! | space       | `<sp>`     |
//! | tab         | `<tab>`    |
//! | newline     | `<nl>`     |
//!
//! History-only entries (n-grams ending in `<s>`) carry the conventional
//! probability `-99`. Grams mentioning `</s>` are accepted and ignored.

use std::f64::consts::LN_10;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::vocab::{Symbol, Vocabulary};

use super::estimate::UNK_FLOOR_FACTOR;
use super::model::NgramModel;
use super::trie::{Trie, ROOT};

const NO_PROB: f64 = -99.0;

fn escape(sym: Symbol) -> String {
    match sym {
        Symbol::Bos => "<s>".into(),
        Symbol::Unk => "<unk>".into(),
        Symbol::Char(' ') => "<sp>".into(),
        Symbol::Char('\t') => "<tab>".into(),
        Symbol::Char('\n') => "<nl>".into(),
        Symbol::Char(c) => c.to_string(),
        Symbol::Byte(b) => format!("<0x{b:02x}>"),
    }
}

enum Word {
    Sym(Symbol),
    EndOfSentence,
}

fn unescape(word: &str) -> Option<Word> {
    Some(Word::Sym(match word {
        "<s>" => Symbol::Bos,
        "<unk>" => Symbol::Unk,
        "<sp>" => Symbol::Char(' '),
        "<tab>" => Symbol::Char('\t'),
        "<nl>" => Symbol::Char('\n'),
        "</s>" => return Some(Word::EndOfSentence),
        other => {
            let mut chars = other.chars();
            let c = chars.next()?;
            if chars.next().is_some() {
                return None;
            }
            Symbol::Char(c)
        }
    }))
}

fn fmt_log10(ln: f64) -> String {
    if ln == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{}", ln / LN_10)
    }
}

pub fn write_arpa<W: Write>(model: &NgramModel, mut out: W) -> Result<()> {
    let trie = model.trie();
    let n = model.order();
    let mut by_depth: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for g in 1..trie.len() as u32 {
        let gi = g as usize;
        if !model.prob[gi].is_nan() || model.bow[gi] != 0.0 {
            by_depth[trie.depth(g)].push(g);
        }
    }
    writeln!(out)?;
    writeln!(out, "\\data\\")?;
    for (k, nodes) in by_depth.iter().enumerate().skip(1) {
        writeln!(out, "ngram {k}={}", nodes.len())?;
    }
    for (k, nodes) in by_depth.iter().enumerate().skip(1) {
        writeln!(out)?;
        writeln!(out, "\\{k}-grams:")?;
        for &g in nodes {
            let gi = g as usize;
            let gram: Vec<String> = trie
                .gram(g)
                .into_iter()
                .map(|t| escape(model.vocab.symbols()[t as usize]))
                .collect();
            let p = model.prob[gi];
            let p = if p.is_nan() { NO_PROB.to_string() } else { fmt_log10(p) };
            write!(out, "{p}\t{}", gram.join(" "))?;
            if k < n && model.bow[gi] != 0.0 {
                write!(out, "\t{}", fmt_log10(model.bow[gi]))?;
            }
            writeln!(out)?;
        }
    }
    writeln!(out)?;
    writeln!(out, "\\end\\")?;
    out.flush()?;
    Ok(())
}

struct Entry {
    gram: Vec<Symbol>,
    prob: f64,
    bow: f64,
}

fn parse_log10(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("not a number: {field:?}")))?;
    if v.is_nan() || v > 0.0 {
        return Err(Error::parse(line, format!("log value out of range: {field:?}")));
    }
    Ok(v * LN_10)
}

pub fn read_arpa<R: BufRead>(input: R) -> Result<NgramModel> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((i, l)) => Ok(Some((i, l?))),
        }
    };

    // header
    let mut last_line = 0;
    loop {
        match next()? {
            None => return Err(Error::parse(last_line, "missing \\data\\ header")),
            Some((i, l)) => {
                last_line = i;
                if l.trim() == "\\data\\" {
                    break;
                }
            }
        }
    }
    let mut declared: Vec<usize> = Vec::new();
    let mut pending: Option<(usize, String)>;
    loop {
        let Some((i, l)) = next()? else {
            return Err(Error::parse(last_line, "unexpected end of file in \\data\\"));
        };
        last_line = i;
        let t = l.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix("ngram ") {
            let (k, c) = rest
                .split_once('=')
                .ok_or_else(|| Error::parse(i, format!("bad count line {t:?}")))?;
            let k: usize = k.trim().parse().map_err(|_| Error::parse(i, "bad order"))?;
            let c: usize = c.trim().parse().map_err(|_| Error::parse(i, "bad count"))?;
            if k != declared.len() + 1 {
                return Err(Error::parse(i, format!("expected ngram {}=", declared.len() + 1)));
            }
            declared.push(c);
        } else {
            pending = Some((i, l));
            break;
        }
    }
    let order = declared.len();
    if order == 0 {
        return Err(Error::parse(last_line, "no n-gram counts declared"));
    }

    let mut entries: Vec<Vec<Entry>> = (0..order).map(|_| Vec::new()).collect();
    let mut section: Option<usize> = None;
    let mut ended = false;
    loop {
        let (i, l) = match pending.take() {
            Some(p) => p,
            None => match next()? {
                Some(p) => p,
                None => break,
            },
        };
        last_line = i;
        let t = l.trim();
        if t.is_empty() {
            continue;
        }
        if t == "\\end\\" {
            ended = true;
            break;
        }
        if t.starts_with('\\') {
            let k: usize = t
                .strip_prefix('\\')
                .and_then(|r| r.strip_suffix("-grams:"))
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| Error::parse(i, format!("bad section header {t:?}")))?;
            let expect = section.map_or(1, |s| s + 1);
            if k != expect || k > order {
                return Err(Error::parse(i, format!("unexpected section \\{k}-grams:")));
            }
            section = Some(k);
            continue;
        }
        let k = section.ok_or_else(|| Error::parse(i, "entry outside a section"))?;
        let fields: Vec<&str> = l.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(i, "expected log10prob, gram and optional backoff"));
        }
        let words: Vec<&str> = fields[1].split(' ').collect();
        if words.len() != k {
            return Err(Error::parse(
                i,
                format!("expected a {k}-gram, found {} words", words.len()),
            ));
        }
        let mut gram = Vec::with_capacity(k);
        let mut skip = false;
        for w in words {
            match unescape(w) {
                Some(Word::Sym(s)) => gram.push(s),
                Some(Word::EndOfSentence) => skip = true,
                None => return Err(Error::parse(i, format!("bad token {w:?}"))),
            }
        }
        let mut prob = parse_log10(fields[0], i)?;
        let bow = match fields.get(2) {
            Some(f) => parse_log10(f, i)?,
            None => 0.0,
        };
        if gram.last() == Some(&Symbol::Bos) && prob <= NO_PROB * LN_10 {
            prob = f64::NAN;
        }
        if !skip {
            entries[k - 1].push(Entry { gram, prob, bow });
        } else {
            entries[k - 1].push(Entry {
                gram: Vec::new(),
                prob,
                bow,
            });
        }
    }
    if !ended {
        return Err(Error::parse(last_line, "missing \\end\\ marker"));
    }
    for (k, (got, want)) in entries.iter().zip(&declared).enumerate() {
        if got.len() != *want {
            return Err(Error::parse(
                last_line,
                format!("{}-grams: header declares {want}, found {}", k + 1, got.len()),
            ));
        }
    }
    build(order, entries)
}

fn build(order: usize, entries: Vec<Vec<Entry>>) -> Result<NgramModel> {
    let chars = entries
        .iter()
        .flatten()
        .flat_map(|e| e.gram.iter())
        .filter_map(|s| match s {
            Symbol::Char(c) => Some(*c),
            _ => None,
        });
    let vocab = Vocabulary::characters(chars);
    let ids = |gram: &[Symbol]| -> Vec<u32> {
        gram.iter()
            .map(|s| vocab.id(*s).expect("vocabulary covers every gram").0)
            .collect()
    };

    let mut trie = Trie::new();
    let mut stored: Vec<(Vec<u32>, f64, f64)> = Vec::new();
    for e in entries.into_iter().flatten() {
        if e.gram.is_empty() {
            continue;
        }
        let g = ids(&e.gram);
        // keep every prefix reachable so state walks never stop early
        for end in 1..=g.len() {
            trie.insert(&g[..end]);
        }
        stored.push((g, e.prob, e.bow));
    }

    let unk = vocab.unk().expect("character vocabulary");
    let mut prob = vec![f64::NAN; trie.len()];
    let mut bow = vec![0.0; trie.len()];
    for (g, p, b) in stored {
        let node = trie.find(&g).expect("inserted above") as usize;
        prob[node] = p;
        bow[node] = b;
    }
    if trie.child(ROOT, unk.0).is_none() {
        let min = (1..trie.len() as u32)
            .filter(|&n| trie.depth(n) == 1 && !prob[n as usize].is_nan())
            .map(|n| prob[n as usize])
            .fold(f64::INFINITY, f64::min);
        trie.child_or_insert(ROOT, unk.0);
        prob.push(UNK_FLOOR_FACTOR.ln() + min);
        bow.push(0.0);
    }
    let bos = vocab.bos().expect("character vocabulary");
    let mut node = ROOT;
    for _ in 1..order {
        let (next, created) = trie.child_or_insert(node, bos.0);
        if created {
            prob.push(f64::NAN);
            bow.push(0.0);
        }
        node = next;
    }
    Ok(NgramModel::from_parts(order, vocab, trie, prob, bow))
}

/// Convenience for reading a model from a path.
pub fn load_arpa(path: &std::path::Path) -> Result<NgramModel> {
    let f = std::fs::File::open(path)?;
    read_arpa(std::io::BufReader::new(f))
}

pub fn save_arpa(model: &NgramModel, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_arpa(model, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::LanguageModel;
    use crate::ngram::{estimate_kn, NgramCounts, PruneConfig};

    fn toy() -> NgramModel {
        let counts = NgramCounts::from_text(&["abab", "abab", "ba b"], 2).unwrap();
        estimate_kn(&counts, &PruneConfig::none(2)).unwrap()
    }

    #[test]
    fn round_trip_preserves_queries() {
        let m = toy();
        let mut buf = Vec::new();
        write_arpa(&m, &mut buf).unwrap();
        let back = read_arpa(buf.as_slice()).unwrap();
        assert_eq!(back.vocab(), m.vocab());
        let v = m.vocab().clone();
        for h in ["", "a", "b", " ", "ab", "zz"] {
            let hist = v.tokenize(h);
            let d1 = m.next_log_probs(&hist).unwrap();
            let d2 = back.next_log_probs(&hist).unwrap();
            for (x, y) in d1.as_slice().iter().zip(d2.as_slice()) {
                assert!((x.exp() - y.exp()).abs() < 1e-4, "{h:?}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn hand_written_unigram_model() {
        // bigram file whose bigram section is empty
        let text = "\\data\\\nngram 1=4\nngram 2=0\n\n\\1-grams:\n-0.30103\ta\n-0.60206\tb\n-0.60206\t<unk>\n-99\t<s>\t0\n\n\\2-grams:\n\n\\end\\\n";
        let m = read_arpa(text.as_bytes()).unwrap();
        let v = m.vocab().clone();
        let a = v.tokenize("a")[0];
        let b = v.tokenize("b")[0];
        let lp_a = m.log_prob(&[], a).unwrap();
        let lp_b = m.log_prob(&[b], b).unwrap();
        assert!((lp_a - 0.5f64.ln()).abs() < 1e-5);
        assert!((lp_b - 0.25f64.ln()).abs() < 1e-5);
    }

    #[test]
    fn missing_end_is_an_error() {
        let m = toy();
        let mut buf = Vec::new();
        write_arpa(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\\end\\", "");
        assert!(matches!(read_arpa(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn count_mismatch_and_bad_numbers() {
        let text = "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.3\ta\n\n\\end\\\n";
        let err = read_arpa(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("declares 2"), "{err}");

        let text = "\\data\\\nngram 1=1\n\n\\1-grams:\nabc\ta\n\\end\\\n";
        match read_arpa(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }

        let text = "\\data\\\nngram 1=1\n\n\\3-grams:\n-1\ta\n\\end\\\n";
        assert!(read_arpa(text.as_bytes()).is_err());
    }

    #[test]
    fn space_token_is_escaped() {
        let m = toy();
        let mut buf = Vec::new();
        write_arpa(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\t<sp>"));
        assert!(text.contains("<s> a"));
    }
}
