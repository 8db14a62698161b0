//! Grid search over the search parameters (threshold, beam width, window).

use std::fmt;

use serde::Serialize;

use crate::corpus::TestPair;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalMode};
use crate::lm::{LanguageModel, Window};
use crate::segment::{Segmenter, SegmenterConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub threshold: f64,
    pub beam_width: usize,
    #[serde(serialize_with = "window_str")]
    pub window: Window,
}

fn window_str<S: serde::Serializer>(w: &Window, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(w)
}

impl GridPoint {
    pub fn apply(&self, base: &SegmenterConfig) -> SegmenterConfig {
        SegmenterConfig {
            threshold: self.threshold,
            beam_width: self.beam_width,
            num_results: base.num_results.min(self.beam_width),
            window: self.window,
            ..base.clone()
        }
    }
}

/// Cartesian product of the three axes, threshold varying slowest.
pub fn grid(thresholds: &[f64], beam_widths: &[usize], windows: &[Window]) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &threshold in thresholds {
        for &beam_width in beam_widths {
            for &window in windows {
                out.push(GridPoint {
                    threshold,
                    beam_width,
                    window,
                });
            }
        }
    }
    out
}

/// Default search grid; it contains both backends' tuned operating points.
pub fn default_grid() -> Vec<GridPoint> {
    grid(
        &[6.0, 8.0, 10.0, 12.0],
        &[10, 100, 500],
        &[Window::new(64).expect("nonzero"), Window::Unbounded],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuneRow {
    pub point: GridPoint,
    pub precision: f64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuneResult {
    pub rows: Vec<TuneRow>,
    /// Index into `rows` of the chosen point.
    pub best: usize,
}

impl TuneResult {
    pub fn best_row(&self) -> &TuneRow {
        &self.rows[self.best]
    }
}

impl fmt::Display for TuneResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>8} {:>6} {:>6} {:>10} {:>10}",
            "t", "b", "win", "precision", "elapsed_s"
        )?;
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(
                f,
                "{:>8} {:>6} {:>6} {:>10.4} {:>10.3}{}",
                r.point.threshold,
                r.point.beam_width,
                r.point.window.to_string(),
                r.precision,
                r.elapsed_seconds,
                if i == self.best { "  *" } else { "" }
            )?;
        }
        Ok(())
    }
}

/// Picks the row with the highest precision; ties go to the faster run, then
/// the earlier grid point.
pub fn select_best(rows: &[TuneRow]) -> Option<usize> {
    (0..rows.len()).reduce(|best, i| {
        let (a, b) = (&rows[i], &rows[best]);
        if a.precision > b.precision || (a.precision == b.precision && a.elapsed_seconds < b.elapsed_seconds) {
            i
        } else {
            best
        }
    })
}

/// Evaluates every grid point on `pairs`.
pub fn tune<M: LanguageModel>(
    model: &M,
    base: &SegmenterConfig,
    points: &[GridPoint],
    pairs: &[TestPair],
    mode: EvalMode,
) -> Result<TuneResult> {
    if points.is_empty() {
        return Err(Error::input("tuning grid is empty"));
    }
    if pairs.is_empty() {
        return Err(Error::input("tuning needs at least one dev pair"));
    }
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let seg = Segmenter::new(model, p.apply(base))?;
        let report = evaluate(|x| seg.segment(x).swap_remove(0).text, pairs, mode)?;
        rows.push(TuneRow {
            point: *p,
            precision: report.precision,
            elapsed_seconds: report.elapsed_seconds,
        });
    }
    let best = select_best(&rows).expect("rows not empty");
    Ok(TuneResult { rows, best })
}
