use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use beamseg::corpus::{
    corpus_stats, make_test_pairs, preprocess, shuffle_split, PreprocessOptions, SplitSpec, TestPair,
};
use beamseg::eval::{EvalMode, EvalReport};
use beamseg::ngram::{self, save_arpa, PruneConfig};
use beamseg::rnn::{save_rnn, tbptt_train, RnnConfig};
use beamseg::segment::{Segmentation, Segmenter, SegmenterConfig};
use beamseg::tune::{default_grid, grid, tune};
use beamseg::{cross_entropy, LanguageModel, Window};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::io::{self as cio, load_model, Backend, CliError, Model, Result};

/// Word segmentation by beam search over character and byte language models.
#[derive(Debug, Parser)]
#[command(name = "beamseg", version, arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a character n-gram model and write it as ARPA.
    TrainNgram(TrainNgramArgs),
    /// Train a byte-level LSTM model and write a checkpoint.
    TrainRnn(TrainRnnArgs),
    /// Segment lines from a file or stdin, one output line per input line.
    Segment(SegmentArgs),
    /// Segment the boundary-stripped reference lines and score exact matches.
    Evaluate(EvaluateArgs),
    /// Corpus statistics, plus model cross-entropy when a model is given.
    Stats(StatsArgs),
    /// Grid search over threshold, beam width and window on a dev set.
    Tune(TuneArgs),
    /// Clean a raw corpus and split it into training and dev files.
    Prepare(PrepareArgs),
}

#[derive(Debug, Args)]
struct TrainNgramArgs {
    /// Training corpus, one line per segment (.gz accepted).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    order: usize,
    /// Drop n-grams seen fewer than this many times.
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Lowest order the count threshold applies to.
    #[arg(long, default_value_t = 2, requires = "min_count")]
    prune_from: usize,
}

#[derive(Debug, Args)]
struct TrainRnnArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Held-out lines whose cross-entropy is stored in the checkpoint.
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 32)]
    embed_dim: usize,
    /// Truncation length for backpropagation through time.
    #[arg(long, default_value_t = 64)]
    rho: usize,
    #[arg(long, default_value_t = 2e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Global gradient-norm clip; 0 disables it.
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// ARPA file (ngram) or checkpoint (rnn).
    #[arg(long)]
    model: PathBuf,
    /// Expected backend; inferred from the file when omitted.
    #[arg(long, value_enum)]
    backend: Option<Backend>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Boundary acceptance threshold (mean negative log-probability); `inf`
    /// accepts every boundary. Default: 10 (ngram), 8 (rnn).
    #[arg(short = 't', long)]
    threshold: Option<f64>,
    /// Beam width. Default: 500 (ngram), 10 (rnn).
    #[arg(short = 'b', long)]
    beam_width: Option<usize>,
    /// Number of segmentations returned per line.
    #[arg(short = 'm', long)]
    num_results: Option<usize>,
    /// Scoring window in tokens, or `inf`. Default: inf (ngram), 64 (rnn).
    #[arg(long)]
    window: Option<Window>,
    #[arg(long, default_value_t = ' ')]
    boundary: char,
    /// Drop all whitespace from the input, not only boundary symbols.
    #[arg(long)]
    strip_whitespace: bool,
}

impl SearchArgs {
    fn config(&self, backend: Backend) -> Result<SegmenterConfig> {
        let mut c = match backend {
            Backend::Ngram => SegmenterConfig::ngram(),
            Backend::Rnn => SegmenterConfig::rnn(),
        };
        if let Some(t) = self.threshold {
            c.threshold = t;
        }
        if let Some(b) = self.beam_width {
            c.beam_width = b;
        }
        if let Some(m) = self.num_results {
            c.num_results = m;
        }
        if let Some(w) = self.window {
            c.window = w;
        }
        c.boundary = self.boundary;
        c.strip_whitespace = self.strip_whitespace;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Input lines; stdin when omitted or `-`.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Reference lines with correct boundaries.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "strict")]
    mode: EvalMode,
    /// Also list every line with its verdict.
    #[arg(long)]
    per_line: bool,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Also report this model's cross-entropy on the corpus.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, requires = "model")]
    backend: Option<Backend>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Dev reference lines with correct boundaries.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "strict")]
    mode: EvalMode,
    /// Comma-separated thresholds; all three axes default to the built-in grid.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    beam_widths: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    windows: Vec<Window>,
    #[arg(long, default_value_t = ' ')]
    boundary: char,
}

#[derive(Debug, Args)]
struct PrepareArgs {
    /// Raw corpus, one document line per line (.gz accepted).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    dev_out: PathBuf,
    #[arg(long, default_value_t = 6000)]
    dev_lines: usize,
    /// Training lines; everything not held out when omitted.
    #[arg(long)]
    train_lines: Option<usize>,
    /// Remove SGML/XML tags.
    #[arg(long)]
    strip_sgml: bool,
    /// Drop cleaned lines longer than this many characters.
    #[arg(long)]
    max_chars: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run(cli: Cli) -> Result<()> {
    let out = &mut BufWriter::new(io::stdout().lock());
    let f = cli.format;
    match cli.command {
        Command::TrainNgram(a) => train_ngram(a, f, out),
        Command::TrainRnn(a) => train_rnn(a, f, out),
        Command::Segment(a) => segment(a, f, out),
        Command::Evaluate(a) => evaluate(a, f, out),
        Command::Stats(a) => stats(a, f, out),
        Command::Tune(a) => tune_cmd(a, f, out),
        Command::Prepare(a) => prepare(a, f, out),
    }?;
    out.flush()?;
    Ok(())
}

fn non_empty(lines: Vec<String>) -> Vec<String> {
    lines.into_iter().filter(|l| !l.is_empty()).collect()
}

fn train_ngram(a: TrainNgramArgs, f: Format, out: &mut impl Write) -> Result<()> {
    let lines = non_empty(cio::read_lines(Some(&a.input))?);
    let prune = PruneConfig::from_order(a.order, a.prune_from, a.min_count);
    let model = ngram::train(&lines, a.order, &prune)?;
    save_arpa(&model, &a.out)?;
    let counts = model.ngram_counts();
    match f {
        Format::Json => writeln!(
            out,
            "{}",
            json!({"order": a.order, "lines": lines.len(), "ngram_counts": counts,
                   "total_ngrams": model.total_ngrams(), "out": a.out})
        )?,
        Format::Human => {
            writeln!(out, "trained order-{} model on {} lines", a.order, lines.len())?;
            for (k, n) in counts.iter().enumerate() {
                writeln!(out, "  {}-grams  {n}", k + 1)?;
            }
            writeln!(out, "wrote {}", a.out.display())?;
        }
    }
    Ok(())
}

fn train_rnn(a: TrainRnnArgs, f: Format, out: &mut impl Write) -> Result<()> {
    let lines = non_empty(cio::read_lines(Some(&a.input))?);
    let config = RnnConfig {
        layers: a.layers,
        width: a.width,
        embed_dim: a.embed_dim,
        rho: a.rho,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        epochs: a.epochs,
        max_steps: a.max_steps,
        clip_norm: a.clip_norm,
        seed: a.seed,
        ..RnnConfig::default()
    };
    let (mut model, report) = tbptt_train(&lines, &config)?;
    if let Some(dev) = &a.dev {
        let dev = non_empty(cio::read_lines(Some(dev))?);
        model.set_validation_loss(Some(model.cross_entropy(&dev)?));
    }
    save_rnn(&model, &a.out)?;
    match f {
        Format::Json => writeln!(
            out,
            "{}",
            json!({"config": config, "parameters": model.num_params(), "steps": report.steps(),
                   "epoch_losses": report.epoch_losses, "validation_loss": model.validation_loss(),
                   "out": a.out})
        )?,
        Format::Human => {
            writeln!(
                out,
                "trained {}x{} LSTM ({} parameters) for {} updates on {} lines",
                config.layers,
                config.width,
                model.num_params(),
                report.steps(),
                lines.len()
            )?;
            for (i, l) in report.epoch_losses.iter().enumerate() {
                writeln!(out, "  epoch {}  loss {l:.4} nats/byte", i + 1)?;
            }
            if let Some(v) = model.validation_loss() {
                writeln!(out, "  validation loss {v:.4} nats/byte")?;
            }
            writeln!(out, "wrote {}", a.out.display())?;
        }
    }
    Ok(())
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))
}

/// Segments `lines` on the pool, keeping input order.
fn segment_batch<M: LanguageModel + Sync>(
    seg: &Segmenter<'_, M>,
    pool: &rayon::ThreadPool,
    lines: &[String],
) -> Vec<Vec<Segmentation>> {
    pool.install(|| lines.par_iter().map(|l| seg.segment(l)).collect())
}

fn write_segmentations(out: &mut impl Write, f: Format, input: &str, segs: &[Segmentation]) -> Result<()> {
    match f {
        Format::Json => {
            let cands: Vec<_> = segs.iter().map(|s| json!({"text": s.text, "score": s.score})).collect();
            writeln!(out, "{}", json!({"input": input, "candidates": cands}))?;
        }
        Format::Human if segs.len() == 1 => writeln!(out, "{}", segs[0].text)?,
        Format::Human => {
            let cells: Vec<String> = segs.iter().map(|s| format!("{}\t{:.6}", s.text, s.score)).collect();
            writeln!(out, "{}", cells.join("\t"))?;
        }
    }
    Ok(())
}

const CHUNK: usize = 1024;

fn segment_stream<M: LanguageModel + Sync>(
    model: &M,
    cfg: SegmenterConfig,
    a: &SegmentArgs,
    f: Format,
    out: &mut impl Write,
) -> Result<()> {
    let seg = Segmenter::new(model, cfg)?;
    let pool = pool(a.threads)?;
    let path = a.input.as_deref();
    let mut lines = cio::lines(cio::open(path)?, path);
    loop {
        let chunk: Vec<String> = lines.by_ref().take(CHUNK).collect::<Result<_>>()?;
        if chunk.is_empty() {
            return Ok(());
        }
        for (line, segs) in chunk.iter().zip(segment_batch(&seg, &pool, &chunk)) {
            write_segmentations(out, f, line, &segs)?;
        }
        out.flush()?;
    }
}

fn loaded(m: &ModelArgs) -> Result<(Model, Backend)> {
    let model = load_model(&m.model, m.backend)?;
    let backend = match model {
        Model::Ngram(_) => Backend::Ngram,
        Model::Rnn(_) => Backend::Rnn,
    };
    Ok((model, backend))
}

fn segment(a: SegmentArgs, f: Format, out: &mut impl Write) -> Result<()> {
    let (model, backend) = loaded(&a.model)?;
    let cfg = a.search.config(backend)?;
    match &model {
        Model::Ngram(m) => segment_stream(m, cfg, &a, f, out),
        Model::Rnn(m) => segment_stream(m, cfg, &a, f, out),
    }
}

fn eval_report<M: LanguageModel + Sync>(
    model: &M,
    cfg: SegmenterConfig,
    pairs: &[TestPair],
    mode: EvalMode,
    threads: usize,
) -> Result<EvalReport> {
    let boundary = cfg.boundary;
    let seg = Segmenter::new(model, cfg)?;
    let pool = pool(threads)?;
    let start = Instant::now();
    let hyps: Vec<String> = pool.install(|| {
        pairs
            .par_iter()
            .map(|p| seg.segment(&p.input).swap_remove(0).text)
            .collect()
    });
    let elapsed = start.elapsed().as_secs_f64();
    Ok(EvalReport::from_hypotheses(pairs, hyps, mode, boundary, elapsed)?)
}

fn read_pairs(path: &Path, boundary: char) -> Result<Vec<TestPair>> {
    Ok(make_test_pairs(&cio::read_lines(Some(path))?, boundary))
}

fn evaluate(a: EvaluateArgs, f: Format, out: &mut impl Write) -> Result<()> {
    let (model, backend) = loaded(&a.model)?;
    let mut cfg = a.search.config(backend)?;
    cfg.num_results = 1;
    let pairs = read_pairs(&a.input, cfg.boundary)?;
    let mut report = match &model {
        Model::Ngram(m) => eval_report(m, cfg, &pairs, a.mode, a.threads),
        Model::Rnn(m) => eval_report(m, cfg, &pairs, a.mode, a.threads),
    }?;
    match f {
        Format::Json => {
            if !a.per_line {
                report.per_line.clear();
            }
            writeln!(out, "{}", serde_json::to_string(&report)?)?;
        }
        Format::Human => writeln!(out, "{}", report.to_text(a.per_line))?,
    }
    Ok(())
}

fn stats(a: StatsArgs, f: Format, out: &mut impl Write) -> Result<()> {
    let lines = cio::read_lines(Some(&a.input))?;
    let s = corpus_stats(&lines)?;
    let mut record = serde_json::to_value(&s)?;
    if let Some(path) = &a.model {
        let model = load_model(path, a.backend)?;
        let (backend, xent, stored) = match &model {
            Model::Ngram(m) => (Backend::Ngram, cross_entropy(m, &lines)?, None),
            Model::Rnn(m) => (Backend::Rnn, m.cross_entropy(&lines)?, m.validation_loss()),
        };
        record["backend"] = json!(backend.to_string());
        record["cross_entropy"] = json!(xent);
        record["bits_per_token"] = json!(xent / std::f64::consts::LN_2);
        record["stored_validation_loss"] = json!(stored);
    }
    match f {
        Format::Json => writeln!(out, "{record}")?,
        Format::Human => {
            writeln!(out, "{s}")?;
            if let Some(x) = record["cross_entropy"].as_f64() {
                let unit = if record["backend"] == "rnn" { "byte" } else { "char" };
                writeln!(
                    out,
                    "cross-entropy  {x:.4} nats/{unit} ({:.4} bits/{unit})",
                    x / std::f64::consts::LN_2
                )?;
                if let Some(v) = record["stored_validation_loss"].as_f64() {
                    writeln!(out, "stored valid.  {v:.4} nats/{unit}")?;
                }
            }
        }
    }
    Ok(())
}

fn tune_cmd(a: TuneArgs, f: Format, out: &mut impl Write) -> Result<()> {
    let (model, backend) = loaded(&a.model)?;
    let pairs = read_pairs(&a.input, a.boundary)?;
    let default_axes = a.thresholds.is_empty() && a.beam_widths.is_empty() && a.windows.is_empty();
    let points = if default_axes {
        default_grid()
    } else {
        let base = match backend {
            Backend::Ngram => SegmenterConfig::ngram(),
            Backend::Rnn => SegmenterConfig::rnn(),
        };
        fn or<T: Clone>(axis: &[T], default: T) -> Vec<T> {
            if axis.is_empty() {
                vec![default]
            } else {
                axis.to_vec()
            }
        }
        grid(
            &or(&a.thresholds, base.threshold),
            &or(&a.beam_widths, base.beam_width),
            &or(&a.windows, base.window),
        )
    };
    let base = SegmenterConfig {
        boundary: a.boundary,
        ..SegmenterConfig::ngram()
    };
    let result = match &model {
        Model::Ngram(m) => tune(m, &base, &points, &pairs, a.mode),
        Model::Rnn(m) => tune(m, &base, &points, &pairs, a.mode),
    }?;
    match f {
        Format::Json => {
            for row in &result.rows {
                writeln!(out, "{}", serde_json::to_string(row)?)?;
            }
            writeln!(out, "{}", json!({"best": result.best_row()}))?;
        }
        Format::Human => {
            write!(out, "{result}")?;
            let b = result.best_row();
            writeln!(
                out,
                "best: t={} b={} win={} precision={:.4}",
                b.point.threshold, b.point.beam_width, b.point.window, b.precision
            )?;
        }
    }
    Ok(())
}

fn prepare(a: PrepareArgs, f: Format, out: &mut impl Write) -> Result<()> {
    let raw = cio::read_lines(Some(&a.input))?;
    let opts = PreprocessOptions {
        strip_sgml: a.strip_sgml,
        max_chars: a.max_chars,
    };
    let clean = preprocess(&raw, &opts);
    if clean.len() < a.dev_lines {
        return Err(CliError::Usage(format!(
            "only {} usable lines, fewer than the {} requested for the dev set",
            clean.len(),
            a.dev_lines
        )));
    }
    let spec = SplitSpec {
        train_n: a.train_lines.unwrap_or(clean.len() - a.dev_lines),
        dev_n: a.dev_lines,
        seed: a.seed,
    };
    let (train, dev) = shuffle_split(&clean, &spec);
    cio::write_lines(&a.train_out, &train)?;
    cio::write_lines(&a.dev_out, &dev)?;
    match f {
        Format::Json => writeln!(
            out,
            "{}",
            json!({"raw_lines": raw.len(), "clean_lines": clean.len(), "train_lines": train.len(),
                   "dev_lines": dev.len(), "seed": a.seed})
        )?,
        Format::Human => writeln!(
            out,
            "{} raw lines, {} after cleaning: {} training -> {}, {} dev -> {}",
            raw.len(),
            clean.len(),
            train.len(),
            a.train_out.display(),
            dev.len(),
            a.dev_out.display()
        )?,
    }
    Ok(())
}
