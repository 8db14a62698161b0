//! Exact-match evaluation.
//!
//! A line counts as correct only if every boundary of the top segmentation
//! sits where the reference has one. In ALNUM mode a boundary position is
//! only compared when the characters on both sides of it are alphanumeric
//! (Unicode letters or digits); positions next to punctuation or symbols are
//! ignored on both sides.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::corpus::TestPair;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Strict,
    Alnum,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Strict => "strict",
            EvalMode::Alnum => "alnum",
        })
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(EvalMode::Strict),
            "alnum" => Ok(EvalMode::Alnum),
            _ => Err(Error::config(format!(
                "unknown evaluation mode {s:?} (expected strict or alnum)"
            ))),
        }
    }
}

/// Characters with `boundary` removed and the set of positions (indices
/// into those characters) that a boundary precedes.
fn boundary_set(text: &str, boundary: char) -> (Vec<char>, BTreeSet<usize>) {
    let mut chars = Vec::with_capacity(text.len());
    let mut set = BTreeSet::new();
    for c in text.chars() {
        if c == boundary {
            set.insert(chars.len());
        } else {
            chars.push(c);
        }
    }
    (chars, set)
}

fn compare(hyp: &str, reference: &str, mode: EvalMode, boundary: char) -> Option<bool> {
    let (hc, hs) = boundary_set(hyp, boundary);
    let (rc, rs) = boundary_set(reference, boundary);
    if hc != rc {
        return None;
    }
    Some(match mode {
        EvalMode::Strict => hs == rs,
        EvalMode::Alnum => {
            let flanked = |p: usize| p > 0 && p < rc.len() && rc[p - 1].is_alphanumeric() && rc[p].is_alphanumeric();
            hs.symmetric_difference(&rs).all(|&p| !flanked(p))
        }
    })
}

/// Whether `hyp` places every (relevant) boundary exactly as `reference`,
/// using a space as the boundary symbol.
pub fn exact_match(hyp: &str, reference: &str, mode: EvalMode) -> Result<bool> {
    exact_match_with(hyp, reference, mode, ' ')
}

pub fn exact_match_with(hyp: &str, reference: &str, mode: EvalMode, boundary: char) -> Result<bool> {
    compare(hyp, reference, mode, boundary).ok_or_else(|| Error::Eval {
        line: 1,
        message: format!("hypothesis {hyp:?} and reference {reference:?} differ beyond boundaries"),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineVerdict {
    pub input: String,
    pub hypothesis: String,
    pub reference: String,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub total: usize,
    pub correct: usize,
    pub precision: f64,
    pub elapsed_seconds: f64,
    pub per_line: Vec<LineVerdict>,
}

impl EvalReport {
    /// Scores already-computed hypotheses (one per pair, in order).
    pub fn from_hypotheses(
        pairs: &[TestPair],
        hypotheses: Vec<String>,
        mode: EvalMode,
        boundary: char,
        elapsed_seconds: f64,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::input("evaluation needs at least one test pair"));
        }
        if hypotheses.len() != pairs.len() {
            return Err(Error::input(format!(
                "{} hypotheses for {} test pairs",
                hypotheses.len(),
                pairs.len()
            )));
        }
        let mut per_line = Vec::with_capacity(pairs.len());
        for (i, (pair, hyp)) in pairs.iter().zip(hypotheses).enumerate() {
            let correct = compare(&hyp, &pair.reference, mode, boundary).ok_or_else(|| Error::Eval {
                line: i + 1,
                message: format!(
                    "hypothesis {hyp:?} does not match reference {:?} once boundaries are removed",
                    pair.reference
                ),
            })?;
            per_line.push(LineVerdict {
                input: pair.input.clone(),
                hypothesis: hyp,
                reference: pair.reference.clone(),
                correct,
            });
        }
        let correct = per_line.iter().filter(|v| v.correct).count();
        Ok(EvalReport {
            mode,
            total: per_line.len(),
            correct,
            precision: correct as f64 / per_line.len() as f64,
            elapsed_seconds,
            per_line,
        })
    }

    /// The same hypotheses judged under another mode.
    pub fn rescore(&self, mode: EvalMode, boundary: char) -> Result<Self> {
        let pairs: Vec<TestPair> = self
            .per_line
            .iter()
            .map(|v| TestPair {
                input: v.input.clone(),
                reference: v.reference.clone(),
            })
            .collect();
        let hyps = self.per_line.iter().map(|v| v.hypothesis.clone()).collect();
        EvalReport::from_hypotheses(&pairs, hyps, mode, boundary, self.elapsed_seconds)
    }

    /// Equality ignoring the timing field.
    pub fn same_outcome(&self, other: &EvalReport) -> bool {
        self.mode == other.mode
            && self.total == other.total
            && self.correct == other.correct
            && self.precision.to_bits() == other.precision.to_bits()
            && self.per_line == other.per_line
    }

    pub fn summary(&self) -> String {
        format!(
            "mode       {}\ntotal      {}\ncorrect    {}\nprecision  {:.4}\nelapsed_s  {:.3}",
            self.mode, self.total, self.correct, self.precision, self.elapsed_seconds
        )
    }

    /// Summary followed by one tab-separated line per pair.
    pub fn to_text(&self, per_line: bool) -> String {
        let mut out = self.summary();
        if per_line {
            out.push_str("\n\nok\tinput\thypothesis\treference");
            for v in &self.per_line {
                out.push_str(&format!(
                    "\n{}\t{}\t{}\t{}",
                    if v.correct { "+" } else { "-" },
                    v.input,
                    v.hypothesis,
                    v.reference
                ));
            }
        }
        out
    }
}

/// Runs `segment` on every input and scores its answer against the
/// reference.
pub fn evaluate<F>(mut segment: F, pairs: &[TestPair], mode: EvalMode) -> Result<EvalReport>
where
    F: FnMut(&str) -> String,
{
    if pairs.is_empty() {
        return Err(Error::input("evaluation needs at least one test pair"));
    }
    let start = Instant::now();
    let hyps: Vec<String> = pairs.iter().map(|p| segment(&p.input)).collect();
    let elapsed = start.elapsed().as_secs_f64();
    EvalReport::from_hypotheses(pairs, hyps, mode, ' ', elapsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::make_test_pairs;

    #[test]
    fn exact_match_examples() {
        for mode in [EvalMode::Strict, EvalMode::Alnum] {
            assert!(!exact_match("no way", "noway", mode).unwrap());
            assert!(exact_match("the price", "the price", mode).unwrap());
        }
        assert!(exact_match("omg u serious ??", "omg u serious??", EvalMode::Alnum).unwrap());
        assert!(!exact_match("omg u serious ??", "omg u serious??", EvalMode::Strict).unwrap());
        assert!(matches!(
            exact_match("ab", "ac", EvalMode::Strict),
            Err(Error::Eval { .. })
        ));
    }

    #[test]
    fn alnum_only_ignores_punctuation_neighbours() {
        assert!(exact_match("well ,then", "well, then", EvalMode::Alnum).unwrap());
        assert!(!exact_match("we ll, then", "well, then", EvalMode::Alnum).unwrap());
    }

    #[test]
    fn perfect_and_degenerate_systems() {
        let pairs = make_test_pairs(&["a b", "c d e", "fg"], ' ');
        let refs: std::collections::HashMap<String, String> =
            pairs.iter().map(|p| (p.input.clone(), p.reference.clone())).collect();
        let r = evaluate(|x| refs[x].clone(), &pairs, EvalMode::Strict).unwrap();
        assert_eq!(r.precision, 1.0);
        let pairs = make_test_pairs(&["a b", "c d e"], ' ');
        let r = evaluate(|x| x.to_string(), &pairs, EvalMode::Strict).unwrap();
        assert_eq!(r.precision, 0.0);
    }

    #[test]
    fn seven_of_ten() {
        let lines: Vec<String> = (0..10).map(|i| format!("w{i} x")).collect();
        let pairs = make_test_pairs(&lines, ' ');
        let mut i = 0;
        let r = evaluate(
            |x| {
                i += 1;
                if i <= 7 {
                    format!("{} x", &x[..x.len() - 1])
                } else {
                    x.to_string()
                }
            },
            &pairs,
            EvalMode::Strict,
        )
        .unwrap();
        assert_eq!((r.total, r.correct), (10, 7));
        assert!((r.precision - 0.7).abs() < 1e-12);
    }

    #[test]
    fn errors_name_the_line() {
        assert!(evaluate(|x| x.to_string(), &[], EvalMode::Strict).is_err());
        let pairs = make_test_pairs(&["a b", "c d"], ' ');
        let err = evaluate(
            |x| if x == "cd" { "zz".into() } else { x.into() },
            &pairs,
            EvalMode::Strict,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Eval { line: 2, .. }));
    }

    #[test]
    fn rescore_and_outcome() {
        let pairs = make_test_pairs(&["hi ?", "a b"], ' ');
        let strict = evaluate(|x| x.to_string(), &pairs, EvalMode::Strict).unwrap();
        let alnum = strict.rescore(EvalMode::Alnum, ' ').unwrap();
        assert_eq!((strict.correct, alnum.correct), (0, 1));
        let mut again = strict.clone();
        again.elapsed_seconds += 1.0;
        assert!(strict.same_outcome(&again));
        assert!(!strict.same_outcome(&alnum));
        assert!(strict.to_text(true).contains("-\thi?\thi?\thi ?"));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("ALNUM".parse::<EvalMode>().unwrap(), EvalMode::Alnum);
        assert!("fuzzy".parse::<EvalMode>().is_err());
    }
}
