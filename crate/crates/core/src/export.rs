//! Plain-text exports of embeddings and projections.
//!
//! Embedding files start with a `<V> <D>` header followed by one
//! `<token> <v_1> ... <v_D>` line per word in index order. Projection files
//! hold `token\tlang\tx\ty` lines. Floats are written in Rust's shortest
//! round-trip form, so reading an export back recovers the exact values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::classifier::ProjectedWord;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::Embeddings;

pub fn write_embeddings<W: Write>(
    out: &mut W,
    vocab: &Vocabulary,
    embeddings: &Embeddings,
) -> std::io::Result<()> {
    writeln!(out, "{} {}", embeddings.words(), embeddings.dim())?;
    for w in 0..embeddings.words() {
        write!(out, "{}", vocab.word(w))?;
        for v in embeddings.column(w) {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    embeddings: &Embeddings,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_embeddings(&mut out, vocab, embeddings)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads an embedding export back as `(tokens, embeddings)`.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(Vec<String>, Embeddings)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, message: &str| Error::Parse {
        path: path.to_owned(),
        line,
        message: message.to_owned(),
    };
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header"))?
        .map_err(|e| Error::io(path, e))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| {
            s.parse()
                .map_err(|_| parse_err(1, "header must be `<V> <D>`"))
        })
        .collect::<Result<_>>()?;
    let [words, dim] = dims[..] else {
        return Err(parse_err(1, "header must be `<V> <D>`"));
    };
    let mut tokens = Vec::with_capacity(words);
    let mut columns = Vec::with_capacity(words);
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let tok = parts.next().unwrap_or_default().to_owned();
        let col: Vec<f64> = parts
            .map(|s| s.parse().map_err(|_| parse_err(n + 2, "bad float")))
            .collect::<Result<_>>()?;
        if col.len() != dim {
            return Err(parse_err(n + 2, "wrong number of values"));
        }
        tokens.push(tok);
        columns.push(col);
    }
    if tokens.len() != words {
        return Err(parse_err(1, "header word count does not match the body"));
    }
    Ok((tokens, Embeddings::from_columns(dim, columns)?))
}

pub fn write_projection<W: Write>(out: &mut W, points: &[ProjectedWord]) -> std::io::Result<()> {
    for p in points {
        writeln!(out, "{}\t{}\t{}\t{}", p.word, p.language, p.x, p.y)?;
    }
    Ok(())
}

pub fn save_projection(path: impl AsRef<Path>, points: &[ProjectedWord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_projection(&mut out, points)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}
