//! Corpus preparation: microblog filtering, shuffle/split, test pairs and
//! descriptive statistics.
//!
//! Filter rules, applied to space-separated tokens:
//!
//! * mention: `@` followed by at least one word character
//! * hashtag: `#` followed by at least one word character
//! * URL: a letter-initial scheme followed by `://`, or `www.`
//!
//! A token is dropped when it *starts* with one of these patterns, so
//! trailing punctuation (`@bob:`) goes with it.

use std::fmt;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::segment::strip_boundaries;

pub const FILTER_HELP: &str = "\
Tokens are split on spaces. A token is removed when it starts with
  @<word chars>                      (mention)
  #<word chars>                      (hashtag)
  <letter><letters/digits/+.->://    (URL with scheme)
  www.                               (bare URL)
Control characters (U+0001..U+001F) become spaces, space runs collapse to
one space, and lines left empty are dropped.";

fn filters() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:@\w|#\w|[A-Za-z][A-Za-z0-9+.\-]*://|(?i:www\.))").expect("valid pattern"))
}

fn sgml_tags() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[^<>\n]*>").expect("valid pattern"))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreprocessOptions {
    /// Remove angle-bracket tags such as `<doc id="1">` first.
    pub strip_sgml: bool,
    /// Drop lines longer than this many characters after cleaning.
    pub max_chars: Option<usize>,
}

/// Cleans one line; `None` if nothing is left of it.
pub fn clean_line(line: &str, opts: &PreprocessOptions) -> Option<String> {
    let tagless;
    let mut text = line;
    if opts.strip_sgml {
        tagless = sgml_tags().replace_all(line, " ");
        text = &tagless;
    }
    let spaced: String = text
        .chars()
        .map(|c| if ('\u{1}'..='\u{1f}').contains(&c) { ' ' } else { c })
        .collect();
    let re = filters();
    let out = spaced
        .split(' ')
        .filter(|t| !t.is_empty() && !re.is_match(t))
        .collect::<Vec<_>>()
        .join(" ");
    if out.is_empty() {
        return None;
    }
    if opts.max_chars.is_some_and(|m| out.chars().count() > m) {
        return None;
    }
    Some(out)
}

pub fn preprocess<S: AsRef<str>>(lines: &[S], opts: &PreprocessOptions) -> Vec<String> {
    lines.iter().filter_map(|l| clean_line(l.as_ref(), opts)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_n: usize,
    pub dev_n: usize,
    pub seed: u64,
}

/// Shuffles `lines` under `spec.seed`; the first `train_n` lines form the
/// training set and the last `dev_n` of the remainder the dev set. When the
/// corpus is too small the training set is filled first.
pub fn shuffle_split<T: Clone>(lines: &[T], spec: &SplitSpec) -> (Vec<T>, Vec<T>) {
    let mut shuffled = lines.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shuffled.shuffle(&mut rng);
    let train_n = spec.train_n.min(shuffled.len());
    let dev_n = spec.dev_n.min(shuffled.len() - train_n);
    let dev = shuffled[shuffled.len() - dev_n..].to_vec();
    shuffled.truncate(train_n);
    (shuffled, dev)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TestPair {
    pub input: String,
    pub reference: String,
}

impl TestPair {
    pub fn new(reference: &str, boundary: char) -> Self {
        TestPair {
            input: strip_boundaries(reference, boundary, false),
            reference: reference.to_string(),
        }
    }
}

pub fn make_test_pairs<S: AsRef<str>>(lines: &[S], boundary: char) -> Vec<TestPair> {
    lines.iter().map(|l| TestPair::new(l.as_ref(), boundary)).collect()
}

/// Per-line averages over a corpus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub lines: usize,
    pub words: f64,
    pub chars: f64,
    pub bytes: f64,
    pub chars_per_word: f64,
    pub bytes_per_char: f64,
}

pub fn corpus_stats<S: AsRef<str>>(lines: &[S]) -> Result<CorpusStats> {
    if lines.is_empty() {
        return Err(Error::input("corpus statistics need at least one line"));
    }
    let (mut words, mut chars, mut bytes) = (0usize, 0usize, 0usize);
    for l in lines {
        let l = l.as_ref();
        words += l.split_whitespace().count();
        chars += l.chars().count();
        bytes += l.len();
    }
    let n = lines.len() as f64;
    let (w, c, b) = (words as f64 / n, chars as f64 / n, bytes as f64 / n);
    Ok(CorpusStats {
        lines: lines.len(),
        words: w,
        chars: c,
        bytes: b,
        chars_per_word: if words == 0 { 0.0 } else { c / w },
        bytes_per_char: if chars == 0 { 0.0 } else { b / c },
    })
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lines          {}", self.lines)?;
        writeln!(f, "words          {:.2}", self.words)?;
        writeln!(f, "chars          {:.2}", self.chars)?;
        writeln!(f, "bytes          {:.2}", self.bytes)?;
        writeln!(f, "chars/word     {:.2}", self.chars_per_word)?;
        write!(f, "bytes/char     {:.2}", self.bytes_per_char)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(s: &str) -> Option<String> {
        clean_line(s, &PreprocessOptions::default())
    }

    #[test]
    fn filters() {
        assert_eq!(pp("see http://t.co/x now").as_deref(), Some("see now"));
        assert_eq!(pp("@bob hi #fun").as_deref(), Some("hi"));
        assert_eq!(pp("plain text").as_deref(), Some("plain text"));
        assert_eq!(pp("go to www.example.com today").as_deref(), Some("go to today"));
        assert_eq!(pp("a\tb\n  c").as_deref(), Some("a b c"));
        assert_eq!(pp("@only #tags"), None);
        assert_eq!(pp(""), None);
        // a lone symbol is not a mention
        assert_eq!(pp("me @ home # 1").as_deref(), Some("me @ home # 1"));
    }

    #[test]
    fn sgml_and_length() {
        let opts = PreprocessOptions {
            strip_sgml: true,
            max_chars: Some(5),
        };
        assert_eq!(clean_line("<p>hi</p>", &opts).as_deref(), Some("hi"));
        assert_eq!(clean_line("<p>too long</p>", &opts), None);
        assert_eq!(pp("<p>hi</p>").as_deref(), Some("<p>hi</p>"));
    }

    #[test]
    fn split_partitions() {
        let lines: Vec<u32> = (0..10).collect();
        let spec = SplitSpec {
            train_n: 7,
            dev_n: 3,
            seed: 1,
        };
        let (train, dev) = shuffle_split(&lines, &spec);
        assert_eq!((train.len(), dev.len()), (7, 3));
        let mut all: Vec<u32> = train.iter().chain(&dev).copied().collect();
        all.sort();
        assert_eq!(all, lines);
        assert_eq!(shuffle_split(&lines, &spec), (train, dev));
    }

    #[test]
    fn split_seeds_differ() {
        let lines: Vec<u32> = (0..100).collect();
        let a = shuffle_split(
            &lines,
            &SplitSpec {
                train_n: 90,
                dev_n: 10,
                seed: 1,
            },
        );
        let b = shuffle_split(
            &lines,
            &SplitSpec {
                train_n: 90,
                dev_n: 10,
                seed: 2,
            },
        );
        assert_ne!(a, b);
    }

    #[test]
    fn split_small_corpus_fills_train_first() {
        let lines: Vec<u32> = (0..5).collect();
        let (train, dev) = shuffle_split(
            &lines,
            &SplitSpec {
                train_n: 4,
                dev_n: 3,
                seed: 0,
            },
        );
        assert_eq!((train.len(), dev.len()), (4, 1));
    }

    #[test]
    fn test_pairs() {
        let p = make_test_pairs(&["web design", "x"], ' ');
        assert_eq!(
            p[0],
            TestPair {
                input: "webdesign".into(),
                reference: "web design".into()
            }
        );
        assert_eq!(
            p[1],
            TestPair {
                input: "x".into(),
                reference: "x".into()
            }
        );
    }

    #[test]
    fn stats() {
        let s = corpus_stats(&["ab cd"]).unwrap();
        assert_eq!((s.words, s.chars, s.bytes), (2.0, 5.0, 5.0));
        let s = corpus_stats(&["añ"]).unwrap();
        assert_eq!((s.chars, s.bytes), (2.0, 3.0));
        assert!((s.bytes_per_char - 1.5).abs() < 1e-12);
        assert!(corpus_stats::<&str>(&[]).is_err());
        let text = corpus_stats(&["ab cd"]).unwrap().to_string();
        assert!(text.contains("chars/word     2.50"));
    }
}
