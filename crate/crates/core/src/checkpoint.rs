//! Binary model checkpoints.
//!
//! All integers and floats are little-endian. Layout, version 1:
//!
//! | field | type |
//! |---|---|
//! | magic | 8 bytes, `b"BILAECKP"` |
//! | format version | `u32` (= 1) |
//! | `D`, `V_x`, `V_y` | 3 × `u32` |
//! | tree seed x, tree seed y | 2 × `u64` |
//! | activation | `u8` (0 = tanh, 1 = identity) |
//! | vocabulary x, vocabulary y | each `u32` entry count, then per entry `u32` byte length, UTF-8 token, `u64` count |
//! | 7 arrays | each `u8` name length, ASCII name, `u32` rows, `u32` cols, `rows·cols` × `f64` row-major |
//!
//! The arrays appear in the order `W_x` (`D × V_x`), `W_y` (`D × V_y`),
//! `c` (`1 × D`), `b_x` (`1 × (V_x−1)`), `U_x` (`(V_x−1) × D`), `b_y`,
//! `U_y`. Trees are not stored; they are rebuilt from `(V, seed)`.
//! Floats are copied bit for bit, so save → load is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::{Language, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Activation, BilingualModel, Decoder, Embeddings, BLOCK_NAMES};
use crate::tree::CodeTree;

pub const MAGIC: &[u8; 8] = b"BILAECKP";
pub const FORMAT_VERSION: u32 = 1;

/// A model together with the vocabularies its indices refer to.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: BilingualModel,
    pub vocab_x: Vocabulary,
    pub vocab_y: Vocabulary,
}

impl Checkpoint {
    pub fn new(model: BilingualModel, vocab_x: Vocabulary, vocab_y: Vocabulary) -> Result<Self> {
        if vocab_x.len() != model.vocab_size(Language::X)
            || vocab_y.len() != model.vocab_size(Language::Y)
        {
            return Err(Error::invalid(
                "vocabulary sizes do not match the model dimensions",
            ));
        }
        Ok(Checkpoint {
            model,
            vocab_x,
            vocab_y,
        })
    }

    pub fn vocab(&self, language: Language) -> &Vocabulary {
        match language {
            Language::X => &self.vocab_x,
            Language::Y => &self.vocab_y,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(&mut BufReader::new(file))
    }

    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let m = &self.model;
        let d = m.dim();
        let vx = m.vocab_size(Language::X);
        let vy = m.vocab_size(Language::Y);
        out.write_all(MAGIC)?;
        write_u32(out, FORMAT_VERSION)?;
        for v in [d, vx, vy] {
            write_u32(out, v as u32)?;
        }
        write_u64(out, m.tree(Language::X).seed())?;
        write_u64(out, m.tree(Language::Y).seed())?;
        out.write_all(&[match m.activation() {
            Activation::Tanh => 0,
            Activation::Identity => 1,
        }])?;
        write_vocab(out, &self.vocab_x)?;
        write_vocab(out, &self.vocab_y)?;

        let blocks = m.blocks();
        for (i, (name, block)) in BLOCK_NAMES.iter().zip(blocks).enumerate() {
            let (rows, cols) = block_shape(i, d, vx, vy);
            out.write_all(&[name.len() as u8])?;
            out.write_all(name.as_bytes())?;
            write_u32(out, rows as u32)?;
            write_u32(out, cols as u32)?;
            if i < 2 {
                // embeddings are stored word-major; the file holds D × V
                for r in 0..rows {
                    for c in 0..cols {
                        out.write_all(&block[c * d + r].to_le_bytes())?;
                    }
                }
            } else {
                for v in block {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        let mut r = Reader { input };
        let mut magic = [0u8; 8];
        r.bytes(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let d = r.u32()? as usize;
        let vx = r.u32()? as usize;
        let vy = r.u32()? as usize;
        let seed_x = r.u64()?;
        let seed_y = r.u64()?;
        let activation = match r.u8()? {
            0 => Activation::Tanh,
            1 => Activation::Identity,
            t => return Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
        };
        let vocab_x = r.vocab()?;
        let vocab_y = r.vocab()?;

        let mut blocks: Vec<Vec<f64>> = Vec::with_capacity(7);
        for (i, name) in BLOCK_NAMES.iter().enumerate() {
            let n = r.u8()? as usize;
            let mut got = vec![0u8; n];
            r.bytes(&mut got)?;
            if got != name.as_bytes() {
                return Err(Error::Checkpoint(format!(
                    "expected array {name}, found {:?}",
                    String::from_utf8_lossy(&got)
                )));
            }
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            if (rows, cols) != block_shape(i, d, vx, vy) {
                return Err(Error::Checkpoint(format!(
                    "array {name} has shape {rows}x{cols}"
                )));
            }
            let mut data = vec![0.0; rows * cols];
            if i < 2 {
                for row in 0..rows {
                    for col in 0..cols {
                        data[col * d + row] = r.f64()?;
                    }
                }
            } else {
                for v in data.iter_mut() {
                    *v = r.f64()?;
                }
            }
            blocks.push(data);
        }

        let mut it = blocks.into_iter();
        let mut next = || it.next().expect("seven blocks");
        let embed_x = embeddings_from(d, vx, next());
        let embed_y = embeddings_from(d, vy, next());
        let c = next();
        let decoder_x = decoder_from(d, next(), next());
        let decoder_y = decoder_from(d, next(), next());
        let model = BilingualModel::from_parts(
            embed_x,
            embed_y,
            c,
            decoder_x,
            decoder_y,
            CodeTree::random(vx, seed_x)?,
            CodeTree::random(vy, seed_y)?,
            activation,
        )?;
        Checkpoint::new(model, vocab_x, vocab_y)
    }
}

fn block_shape(i: usize, d: usize, vx: usize, vy: usize) -> (usize, usize) {
    match i {
        0 => (d, vx),
        1 => (d, vy),
        2 => (1, d),
        3 => (1, vx - 1),
        4 => (vx - 1, d),
        5 => (1, vy - 1),
        6 => (vy - 1, d),
        _ => unreachable!(),
    }
}

fn embeddings_from(d: usize, v: usize, data: Vec<f64>) -> Embeddings {
    let mut e = Embeddings::zeros(d, v);
    e.as_mut_slice().copy_from_slice(&data);
    e
}

fn decoder_from(d: usize, bias: Vec<f64>, weights: Vec<f64>) -> Decoder {
    let mut dec = Decoder::zeros(d, bias.len());
    dec.bias_mut().copy_from_slice(&bias);
    dec.weights_mut().copy_from_slice(&weights);
    dec
}

fn write_u32<W: Write>(out: &mut W, v: u32) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn write_u64<W: Write>(out: &mut W, v: u64) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn write_vocab<W: Write>(out: &mut W, vocab: &Vocabulary) -> std::io::Result<()> {
    write_u32(out, vocab.len() as u32)?;
    for (w, c) in vocab.words().iter().zip(vocab.counts()) {
        write_u32(out, w.len() as u32)?;
        out.write_all(w.as_bytes())?;
        write_u64(out, *c)?;
    }
    Ok(())
}

struct Reader<'a, R> {
    input: &'a mut R,
}

impl<R: Read> Reader<'_, R> {
    fn bytes(&mut self, buf: &mut [u8]) -> Result<()> {
        self.input
            .read_exact(buf)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.bytes(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn vocab(&mut self) -> Result<Vocabulary> {
        let n = self.u32()? as usize;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let len = self.u32()? as usize;
            let mut buf = vec![0u8; len];
            self.bytes(&mut buf)?;
            let word = String::from_utf8(buf)
                .map_err(|_| Error::Checkpoint("vocabulary token is not UTF-8".into()))?;
            entries.push((word, self.u64()?));
        }
        Vocabulary::from_entries(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn vocab(n: usize, prefix: &str) -> Vocabulary {
        Vocabulary::from_entries(
            (0..n)
                .map(|i| (format!("{prefix}{i}"), (n - i) as u64))
                .collect(),
        )
        .unwrap()
    }

    fn sample() -> Checkpoint {
        let mut model = BilingualModel::new(&ModelConfig {
            dim: 3,
            vocab_x: 5,
            vocab_y: 4,
            tree_seed_x: 10,
            tree_seed_y: 20,
            init_seed: 30,
            activation: Activation::Identity,
        })
        .unwrap();
        // non-trivial values everywhere, including awkward bit patterns
        for (b, block) in model.blocks_mut().into_iter().enumerate() {
            for (i, v) in block.iter_mut().enumerate() {
                *v = ((b * 31 + i) as f64).sin() / 3.0 + f64::EPSILON * i as f64;
            }
        }
        Checkpoint::new(model, vocab(5, "x"), vocab(4, "y")).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        let back = Checkpoint::read(&mut buf.as_slice()).unwrap();
        for (a, b) in ck.model.blocks().iter().zip(back.model.blocks()) {
            let ab: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
        assert_eq!(back, ck);
    }

    #[test]
    fn embedding_array_is_dim_by_vocab_row_major() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        // header: 8 + 4 + 12 + 16 + 1, then the two vocabularies
        let mut off = 41;
        for v in [&ck.vocab_x, &ck.vocab_y] {
            off += 4;
            for w in v.words() {
                off += 4 + w.len() + 8;
            }
        }
        assert_eq!(buf[off], 3);
        assert_eq!(&buf[off + 1..off + 4], b"W_x");
        off += 4;
        assert_eq!(u32::from_le_bytes(buf[off..off + 4].try_into().unwrap()), 3);
        assert_eq!(
            u32::from_le_bytes(buf[off + 4..off + 8].try_into().unwrap()),
            5
        );
        off += 8;
        // second value in the file is W_x[0, 1], i.e. word 1's first coordinate
        let v = f64::from_le_bytes(buf[off + 8..off + 16].try_into().unwrap());
        assert_eq!(v, ck.model.embeddings(Language::X).column(1)[0]);
    }

    #[test]
    fn rejects_corruption() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Checkpoint::read(&mut bad.as_slice()).is_err());

        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(Checkpoint::read(&mut bad.as_slice()).is_err());

        let truncated = &buf[..buf.len() - 3];
        assert!(Checkpoint::read(&mut &truncated[..]).is_err());
    }

    #[test]
    fn vocab_size_must_match() {
        let ck = sample();
        assert!(Checkpoint::new(ck.model, vocab(4, "x"), vocab(4, "y")).is_err());
    }
}
