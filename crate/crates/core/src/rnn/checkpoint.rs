//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "BSEGRNN\0"
//! version  u32      1
//! layers, width, embed_dim, rho, batch_size, epochs   u32 each
//! learning_rate, beta1, beta2, epsilon, clip_norm     f64 each
//! seed     u64
//! vocab    u32      225
//! has_val  u8       0 or 1, followed by the f64 validation loss if 1
//! count    u64      number of parameters
//! params   count × f32
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vocab::BYTE_VOCAB_SIZE;

use super::model::RnnModel;
use super::RnnConfig;

const MAGIC: &[u8; 8] = b"BSEGRNN\0";
const VERSION: u32 = 1;

pub fn write_rnn<W: Write>(model: &RnnModel, mut w: W) -> Result<()> {
    let c = model.config();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [c.layers, c.width, c.embed_dim, c.rho, c.batch_size, c.epochs] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for v in [c.learning_rate, c.beta1, c.beta2, c.epsilon, c.clip_norm] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&c.seed.to_le_bytes())?;
    w.write_all(&(BYTE_VOCAB_SIZE as u32).to_le_bytes())?;
    match model.validation_loss() {
        Some(v) => {
            w.write_all(&[1])?;
            w.write_all(&v.to_le_bytes())?;
        }
        None => w.write_all(&[0])?,
    }
    w.write_all(&(model.params().len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(model.params().len() * 4);
    for p in model.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| Error::Load(format!("checkpoint truncated while reading {what}")))?;
        Ok(b)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }
}

pub fn read_rnn<R: Read>(r: R) -> Result<RnnModel> {
    let mut r = Reader { inner: r };
    if &r.bytes::<8>("magic")? != MAGIC {
        return Err(Error::Load("not a recurrent model checkpoint".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Load(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let mut dims = [0usize; 6];
    for (d, name) in dims
        .iter_mut()
        .zip(["layers", "width", "embedding dimension", "rho", "batch size", "epochs"])
    {
        *d = r.u32(name)? as usize;
    }
    let mut reals = [0f64; 5];
    for (v, name) in reals
        .iter_mut()
        .zip(["learning rate", "beta1", "beta2", "epsilon", "clip norm"])
    {
        *v = r.f64(name)?;
    }
    let seed = r.u64("seed")?;
    let vocab = r.u32("vocabulary size")? as usize;
    if vocab != BYTE_VOCAB_SIZE {
        return Err(Error::Load(format!(
            "vocabulary size {vocab} does not match {BYTE_VOCAB_SIZE}"
        )));
    }
    let validation_loss = match r.bytes::<1>("validation flag")?[0] {
        0 => None,
        1 => Some(r.f64("validation loss")?),
        b => return Err(Error::Load(format!("bad validation flag {b}"))),
    };
    let config = RnnConfig {
        layers: dims[0],
        width: dims[1],
        embed_dim: dims[2],
        rho: dims[3],
        batch_size: dims[4],
        epochs: dims[5],
        learning_rate: reals[0],
        beta1: reals[1],
        beta2: reals[2],
        epsilon: reals[3],
        clip_norm: reals[4],
        max_steps: None,
        seed,
    };
    config
        .validate()
        .map_err(|e| Error::Load(format!("bad configuration: {e}")))?;
    let count = r.u64("parameter count")? as usize;
    let expected = super::net::Layout::new(&config, vocab).total();
    if count != expected {
        return Err(Error::Load(format!(
            "checkpoint holds {count} parameters but its configuration needs {expected}"
        )));
    }
    let mut raw = vec![0u8; count * 4];
    r.inner
        .read_exact(&mut raw)
        .map_err(|_| Error::Load("checkpoint truncated while reading parameters".into()))?;
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra)? != 0 {
        return Err(Error::Load("trailing data after parameters".into()));
    }
    let params = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let mut model = RnnModel::from_params(config, params)?;
    model.set_validation_loss(validation_loss);
    Ok(model)
}

pub fn save_rnn(model: &RnnModel, path: impl AsRef<Path>) -> Result<()> {
    write_rnn(model, BufWriter::new(File::create(path)?))
}

pub fn load_rnn(path: impl AsRef<Path>) -> Result<RnnModel> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
    read_rnn(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::LanguageModel;
    use crate::rnn::byte_tokenize;

    fn model() -> RnnModel {
        let mut m = RnnModel::new(RnnConfig {
            layers: 2,
            width: 8,
            embed_dim: 4,
            seed: 3,
            ..RnnConfig::default()
        })
        .unwrap();
        m.set_validation_loss(Some(4.25));
        m
    }

    fn bytes(m: &RnnModel) -> Vec<u8> {
        let mut out = Vec::new();
        write_rnn(m, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = read_rnn(&bytes(&m)[..]).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.validation_loss(), Some(4.25));
        let h = byte_tokenize(b"round trip");
        assert_eq!(m.next_log_probs(&h).unwrap(), back.next_log_probs(&h).unwrap());
    }

    #[test]
    fn truncation_and_corruption() {
        let b = bytes(&model());
        for cut in [0, 4, 20, 70, b.len() - 1] {
            assert!(matches!(read_rnn(&b[..cut]), Err(Error::Load(_))), "cut {cut}");
        }
        let mut bad = b.clone();
        bad[8] = 9;
        assert!(matches!(read_rnn(&bad[..]), Err(Error::Load(_))));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(read_rnn(&long[..]), Err(Error::Load(_))));
        let mut dims = b;
        dims[16] = 9; // width
        assert!(matches!(read_rnn(&dims[..]), Err(Error::Load(_))));
    }
}
