//! Vocabularies, bags-of-words, parallel sentence files and weighted documents.
//!
//! Input text is expected to be pre-tokenized: tokens are separated by
//! whitespace and every line holds one sentence (or one document). The only
//! normalization applied here is optional lowercasing.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One of the two languages of a bilingual model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Language {
    X,
    Y,
}

impl Language {
    pub fn other(self) -> Language {
        match self {
            Language::X => Language::Y,
            Language::Y => Language::X,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Language::X => "x",
            Language::Y => "y",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Language::X),
            "y" | "Y" => Ok(Language::Y),
            other => Err(Error::invalid(format!("unknown language {other:?}"))),
        }
    }
}

/// Splits a line on whitespace, optionally lowercasing every token.
pub fn tokenize(line: &str, lowercase: bool) -> Vec<String> {
    line.split_whitespace()
        .map(|t| {
            if lowercase {
                t.to_lowercase()
            } else {
                t.to_owned()
            }
        })
        .collect()
}

/// Reads a whitespace-tokenized file, one token list per line.
pub fn read_token_lines(path: impl AsRef<Path>, lowercase: bool) -> Result<Vec<Vec<String>>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|line| Ok(tokenize(&line, lowercase)))
        .collect()
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

/// Bidirectional word ↔ index map with corpus frequencies.
///
/// Indices are assigned by descending frequency, ties broken by
/// lexicographic order of the token, so the mapping is a pure function of the
/// token counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Counts tokens over `token_lines` and keeps those seen at least
    /// `min_count` times, truncated to the `max_size` most frequent.
    pub fn build<L, T>(token_lines: L, min_count: u64, max_size: Option<usize>) -> Result<Self>
    where
        L: IntoIterator,
        L::Item: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        if min_count == 0 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        let mut freq: HashMap<String, u64> = HashMap::new();
        let mut lines = 0usize;
        for line in token_lines {
            lines += 1;
            for tok in line {
                let tok = tok.as_ref();
                match freq.get_mut(tok) {
                    Some(c) => *c += 1,
                    None => {
                        freq.insert(tok.to_owned(), 1);
                    }
                }
            }
        }
        if lines == 0 {
            return Err(Error::invalid("no input lines"));
        }
        let mut entries: Vec<(String, u64)> =
            freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(max) = max_size {
            entries.truncate(max);
        }
        Self::from_entries(entries)
    }

    /// Builds a vocabulary from `(token, count)` entries taken to already be in
    /// index order.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut index = HashMap::with_capacity(entries.len());
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (i, (w, c)) in entries.into_iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary entry {w:?}")));
            }
            words.push(w);
            counts.push(c);
        }
        Ok(Vocabulary {
            words,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Writes `<token> <count>` lines in index order.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (w, c) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{w} {c}")?;
        }
        Ok(())
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
        let mut entries = Vec::new();
        for (n, line) in read_lines(path)?.into_iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: &str| Error::Parse {
                path: path.to_owned(),
                line: n + 1,
                message: message.to_owned(),
            };
            let (tok, count) = line
                .rsplit_once(' ')
                .ok_or_else(|| parse_err("expected `<token> <count>`"))?;
            let count = count
                .parse::<u64>()
                .map_err(|_| parse_err("count is not an unsigned integer"))?;
            entries.push((tok.to_owned(), count));
        }
        Self::from_entries(entries)
    }
}

/// An order-free multiset of word indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BagOfWords {
    indices: Vec<usize>,
}

impl BagOfWords {
    pub fn new(indices: Vec<usize>) -> Self {
        BagOfWords { indices }
    }

    /// Maps tokens through `vocab`, silently dropping unknown ones.
    pub fn from_tokens<T: AsRef<str>>(tokens: &[T], vocab: &Vocabulary) -> Self {
        BagOfWords {
            indices: tokens
                .iter()
                .filter_map(|t| vocab.get(t.as_ref()))
                .collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Distinct indices in ascending order with their multiplicities.
    pub fn counts(&self) -> Vec<(usize, usize)> {
        let mut sorted = self.indices.clone();
        sorted.sort_unstable();
        let mut out: Vec<(usize, usize)> = Vec::new();
        for i in sorted {
            match out.last_mut() {
                Some((w, c)) if *w == i => *c += 1,
                _ => out.push((i, 1)),
            }
        }
        out
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.iter().copied().max()
    }
}

/// Shorthand for [`BagOfWords::from_tokens`].
pub fn to_bag<T: AsRef<str>>(tokens: &[T], vocab: &Vocabulary) -> BagOfWords {
    BagOfWords::from_tokens(tokens, vocab)
}

/// A sentence and its translation, each as a bag over its own vocabulary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SentencePair {
    pub source: BagOfWords,
    pub target: BagOfWords,
}

impl SentencePair {
    pub fn new(source: BagOfWords, target: BagOfWords) -> Self {
        SentencePair { source, target }
    }

    pub fn bag(&self, language: Language) -> &BagOfWords {
        match language {
            Language::X => &self.source,
            Language::Y => &self.target,
        }
    }
}

/// Pairs read from two line-aligned files.
#[derive(Clone, Debug)]
pub struct ParallelCorpus {
    pub pairs: Vec<SentencePair>,
    /// Number of aligned lines in each input file.
    pub lines: usize,
}

impl ParallelCorpus {
    pub fn dropped(&self) -> usize {
        self.lines - self.pairs.len()
    }
}

/// Reads two line-aligned files into sentence pairs.
///
/// Lines where both sides are empty after dropping out-of-vocabulary tokens
/// are skipped; every other line yields one pair, in file order.
pub fn load_parallel(
    source_path: impl AsRef<Path>,
    target_path: impl AsRef<Path>,
    vocab_x: &Vocabulary,
    vocab_y: &Vocabulary,
    lowercase: bool,
) -> Result<ParallelCorpus> {
    let src = read_token_lines(source_path, lowercase)?;
    let tgt = read_token_lines(target_path, lowercase)?;
    if src.len() != tgt.len() {
        return Err(Error::LineCountMismatch(src.len(), tgt.len()));
    }
    let lines = src.len();
    let pairs = src
        .iter()
        .zip(&tgt)
        .map(|(s, t)| SentencePair::new(to_bag(s, vocab_x), to_bag(t, vocab_y)))
        .filter(|p| !(p.source.is_empty() && p.target.is_empty()))
        .collect();
    Ok(ParallelCorpus { pairs, lines })
}

/// A tokenized document with its label name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDocument {
    pub label: String,
    pub tokens: Vec<String>,
}

/// Reads `<label>\t<token token ...>` lines.
pub fn read_labeled_documents(path: impl AsRef<Path>, lowercase: bool) -> Result<Vec<RawDocument>> {
    let path = path.as_ref();
    let mut docs = Vec::new();
    for (n, line) in read_lines(path)?.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: n + 1,
            message: "expected `<label>\\t<tokens>`".to_owned(),
        })?;
        docs.push(RawDocument {
            label: label.trim().to_owned(),
            tokens: tokenize(text, lowercase),
        });
    }
    Ok(docs)
}

/// Sorted list of label names; a label's id is its position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut names: Vec<String> = names.into_iter().map(|s| s.as_ref().to_owned()).collect();
        names.sort();
        names.dedup();
        LabelSet { names }
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// How raw term counts become document weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightMode {
    /// `tf · ln(N / df)`, then scaled to sum to one.
    Tfidf,
    /// 1 for every word present.
    Binary,
}

impl WeightMode {
    pub const ALL: [WeightMode; 2] = [WeightMode::Tfidf, WeightMode::Binary];

    pub fn name(self) -> &'static str {
        match self {
            WeightMode::Tfidf => "tfidf",
            WeightMode::Binary => "binary",
        }
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(WeightMode::Tfidf),
            "binary" => Ok(WeightMode::Binary),
            other => Err(Error::invalid(format!("unknown weight mode {other:?}"))),
        }
    }
}

/// A labeled document as sparse `(word index, weight)` entries sorted by index.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub weights: Vec<(usize, f64)>,
    pub label: usize,
    pub language: Language,
    /// Set when every weight is zero (empty document, or only words that
    /// occur in every document under tf-idf).
    pub degenerate: bool,
}

/// Weighted documents of one language.
#[derive(Clone, Debug, PartialEq)]
pub struct DocumentSet {
    pub documents: Vec<Document>,
    pub mode: WeightMode,
    pub language: Language,
}

/// Index ranges of a train/validation/test split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: std::ops::Range<usize>,
    pub valid: std::ops::Range<usize>,
    pub test: std::ops::Range<usize>,
}

impl Split {
    /// Contiguous split in input order: the first `train` fraction, then
    /// `valid`, then the remainder.
    pub fn by_fractions(n: usize, train: f64, valid: f64) -> Split {
        let n_train = ((n as f64) * train).round() as usize;
        let n_valid = ((n as f64) * valid).round() as usize;
        let n_train = n_train.min(n);
        let n_valid = n_valid.min(n - n_train);
        Split {
            train: 0..n_train,
            valid: n_train..n_train + n_valid,
            test: n_train + n_valid..n,
        }
    }
}

impl DocumentSet {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> &[Document] {
        &self.documents[range]
    }
}

/// Weights tokenized, labeled documents against `vocab`.
///
/// In tf-idf mode `N` and `df` are taken over `raw_docs` itself, so this
/// should be called on all documents of a language at once.
pub fn tfidf<T: AsRef<str>>(
    raw_docs: &[(Vec<T>, usize)],
    vocab: &Vocabulary,
    mode: WeightMode,
    language: Language,
) -> DocumentSet {
    let counted: Vec<Vec<(usize, usize)>> = raw_docs
        .iter()
        .map(|(tokens, _)| to_bag(tokens, vocab).counts())
        .collect();

    let n = raw_docs.len() as f64;
    let mut df = vec![0usize; vocab.len()];
    for doc in &counted {
        for &(w, _) in doc {
            df[w] += 1;
        }
    }

    let documents = counted
        .into_iter()
        .zip(raw_docs)
        .map(|(counts, (_, label))| {
            let weights: Vec<(usize, f64)> = match mode {
                WeightMode::Binary => counts.iter().map(|&(w, _)| (w, 1.0)).collect(),
                WeightMode::Tfidf => {
                    let raw: Vec<(usize, f64)> = counts
                        .iter()
                        .map(|&(w, tf)| (w, tf as f64 * (n / df[w] as f64).ln()))
                        .collect();
                    let total: f64 = raw.iter().map(|&(_, v)| v).sum();
                    if total > 0.0 {
                        raw.into_iter().map(|(w, v)| (w, v / total)).collect()
                    } else {
                        raw
                    }
                }
            };
            let degenerate = weights.iter().all(|&(_, v)| v == 0.0);
            Document {
                weights,
                label: *label,
                language,
                degenerate,
            }
        })
        .collect();

    DocumentSet {
        documents,
        mode,
        language,
    }
}
