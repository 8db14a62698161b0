use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use beamseg::ngram::{load_arpa, NgramModel};
use beamseg::rnn::{load_rnn, RnnModel};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] beamseg::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("cannot write output: {0}")]
    Output(#[from] io::Error),
    #[error("cannot encode output: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

fn file_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Reader over a UTF-8 file (gzip-compressed if the name ends in `.gz`),
/// or over stdin when `path` is `None` or `-`.
pub fn open(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    Ok(match path {
        None => Box::new(io::stdin().lock()),
        Some(p) if p == Path::new("-") => Box::new(io::stdin().lock()),
        Some(p) => {
            let f = File::open(p).map_err(file_error(p))?;
            if p.extension().is_some_and(|e| e == "gz") {
                Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(f)))
            } else {
                Box::new(BufReader::new(f))
            }
        }
    })
}

/// Lines of `reader` without their terminators, as they are read.
pub fn lines<'a>(reader: Box<dyn BufRead + 'a>, path: Option<&'a Path>) -> impl Iterator<Item = Result<String>> + 'a {
    let name = path.map_or_else(|| PathBuf::from("<stdin>"), Path::to_path_buf);
    reader.lines().map(move |l| {
        l.map(|l| l.strip_suffix('\r').map(str::to_string).unwrap_or(l))
            .map_err(file_error(&name))
    })
}

pub fn read_lines(path: Option<&Path>) -> Result<Vec<String>> {
    lines(open(path)?, path).collect()
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(file_error(path))?);
    for l in lines {
        writeln!(w, "{}", l.as_ref()).map_err(file_error(path))?;
    }
    w.flush().map_err(file_error(path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Backend {
    Ngram,
    Rnn,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Ngram => "ngram",
            Backend::Rnn => "rnn",
        })
    }
}

pub enum Model {
    Ngram(NgramModel),
    Rnn(RnnModel),
}

const RNN_MAGIC: &[u8] = b"BSEGRNN\0";

/// Backend a model file was written by, judged from its first bytes.
pub fn sniff_backend(path: &Path) -> Result<Backend> {
    let mut head = [0u8; 8];
    let mut f = File::open(path).map_err(file_error(path))?;
    let n = f.read(&mut head).map_err(file_error(path))?;
    Ok(if &head[..n] == RNN_MAGIC {
        Backend::Rnn
    } else {
        Backend::Ngram
    })
}

/// Loads `path`, checking it against `expected` when given.
pub fn load_model(path: &Path, expected: Option<Backend>) -> Result<Model> {
    let found = sniff_backend(path)?;
    if let Some(want) = expected {
        if want != found {
            return Err(CliError::Usage(format!(
                "backend mismatch: {} is an {found} model but --backend {want} was given",
                path.display()
            )));
        }
    }
    Ok(match found {
        Backend::Ngram => Model::Ngram(load_arpa(path)?),
        Backend::Rnn => Model::Rnn(load_rnn(path)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_gzip_and_plain() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("a.txt");
        std::fs::write(&plain, "one\r\ntwo\n").unwrap();
        assert_eq!(read_lines(Some(&plain)).unwrap(), ["one", "two"]);
        let gz = dir.path().join("a.txt.gz");
        let mut enc = flate2::write::GzEncoder::new(File::create(&gz).unwrap(), flate2::Compression::fast());
        enc.write_all(b"x y\nz\n").unwrap();
        enc.finish().unwrap();
        assert_eq!(read_lines(Some(&gz)).unwrap(), ["x y", "z"]);
        assert!(matches!(
            read_lines(Some(&dir.path().join("missing"))),
            Err(CliError::File { .. })
        ));
    }
}
