//! Synthetic bilingual corpus with known ground truth.
//!
//! Language X has words `x00, x01, ...`. Language Y is a seeded random
//! bijective renaming of X: the translation of `x{i}` is `y{perm[i]}`.
//! Each topic owns a block of words and draws from it with Zipf-shaped
//! weights, mixed with a uniform background over the whole vocabulary.
//! Parallel sentences are a bag of X words and the renamed bag; labeled
//! documents are drawn independently for each language with the topic as
//! label.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub topics: usize,
    pub sentences: usize,
    pub sentence_len: (usize, usize),
    /// Labeled documents per language.
    pub documents: usize,
    pub document_len: (usize, usize),
    /// Exponent `s` of the within-topic weights `1 / rank^s`.
    pub zipf_exponent: f64,
    /// Probability that a token comes from the uniform background.
    pub background: f64,
    pub seed: u64,
    pub permutation_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 60,
            topics: 4,
            sentences: 2000,
            sentence_len: (5, 15),
            documents: 800,
            document_len: (20, 60),
            zipf_exponent: 2.0,
            background: 0.1,
            seed: 2024,
            permutation_seed: 99,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub words_x: Vec<String>,
    pub words_y: Vec<String>,
    /// `translation[i]` is the index in `words_y` of `words_x[i]`.
    pub translation: Vec<usize>,
    pub parallel_x: Vec<Vec<String>>,
    pub parallel_y: Vec<Vec<String>>,
    pub documents_x: Vec<(String, Vec<String>)>,
    pub documents_y: Vec<(String, Vec<String>)>,
}

/// Paths written by [`SynthCorpus::write_to_dir`].
#[derive(Clone, Debug)]
pub struct SynthFiles {
    pub parallel_x: PathBuf,
    pub parallel_y: PathBuf,
    pub documents_x: PathBuf,
    pub documents_y: PathBuf,
    pub translation: PathBuf,
}

pub fn topic_label(topic: usize) -> String {
    format!("T{topic}")
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    let v = config.vocab_size;
    if v < 2 || config.topics == 0 || config.topics > v {
        return Err(Error::invalid("need at least 2 words and 1..=V topics"));
    }
    let (smin, smax) = config.sentence_len;
    let (dmin, dmax) = config.document_len;
    if smin == 0 || smin > smax || dmin == 0 || dmin > dmax {
        return Err(Error::invalid("bad length range"));
    }
    if !(0.0..=1.0).contains(&config.background) {
        return Err(Error::invalid("background probability must be in [0, 1]"));
    }

    let width = (v - 1).to_string().len().max(2);
    let words_x: Vec<String> = (0..v).map(|i| format!("x{i:0width$}")).collect();
    let words_y: Vec<String> = (0..v).map(|i| format!("y{i:0width$}")).collect();

    let mut perm_rng = ChaCha8Rng::seed_from_u64(config.permutation_seed);
    let mut translation: Vec<usize> = (0..v).collect();
    translation.shuffle(&mut perm_rng);

    // topic t owns the words in blocks[t], most probable first
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut owners: Vec<usize> = (0..v).collect();
    owners.shuffle(&mut rng);
    let blocks: Vec<Vec<usize>> = (0..config.topics)
        .map(|t| {
            owners
                .iter()
                .copied()
                .skip(t)
                .step_by(config.topics)
                .collect()
        })
        .collect();
    let topic_dists: Vec<WeightedIndex<f64>> = blocks
        .iter()
        .map(|b| {
            WeightedIndex::new((0..b.len()).map(|r| ((r + 1) as f64).powf(-config.zipf_exponent)))
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::invalid(e.to_string()))?;

    let draw = |rng: &mut ChaCha8Rng, topic: usize| -> usize {
        if rng.random_bool(config.background) {
            rng.random_range(0..v)
        } else {
            blocks[topic][topic_dists[topic].sample(rng)]
        }
    };

    let mut parallel_x = Vec::with_capacity(config.sentences);
    let mut parallel_y = Vec::with_capacity(config.sentences);
    for _ in 0..config.sentences {
        let topic = rng.random_range(0..config.topics);
        let len = rng.random_range(smin..=smax);
        let ids: Vec<usize> = (0..len).map(|_| draw(&mut rng, topic)).collect();
        let mut y_ids: Vec<usize> = ids.iter().map(|&i| translation[i]).collect();
        y_ids.shuffle(&mut rng);
        parallel_x.push(ids.iter().map(|&i| words_x[i].clone()).collect());
        parallel_y.push(y_ids.iter().map(|&i| words_y[i].clone()).collect());
    }

    let documents = |rng: &mut ChaCha8Rng, rename: bool| -> Vec<(String, Vec<String>)> {
        (0..config.documents)
            .map(|_| {
                let topic = rng.random_range(0..config.topics);
                let len = rng.random_range(dmin..=dmax);
                let tokens = (0..len)
                    .map(|_| {
                        let i = draw(rng, topic);
                        if rename {
                            words_y[translation[i]].clone()
                        } else {
                            words_x[i].clone()
                        }
                    })
                    .collect();
                (topic_label(topic), tokens)
            })
            .collect()
    };
    let mut doc_rng_x = ChaCha8Rng::seed_from_u64(config.seed);
    doc_rng_x.set_stream(1);
    let mut doc_rng_y = ChaCha8Rng::seed_from_u64(config.seed);
    doc_rng_y.set_stream(2);
    let documents_x = documents(&mut doc_rng_x, false);
    let documents_y = documents(&mut doc_rng_y, true);

    Ok(SynthCorpus {
        words_x,
        words_y,
        translation,
        parallel_x,
        parallel_y,
        documents_x,
        documents_y,
    })
}

impl SynthCorpus {
    pub fn translate(&self, x_word: &str) -> Option<&str> {
        let i = self.words_x.iter().position(|w| w == x_word)?;
        Some(&self.words_y[self.translation[i]])
    }

    /// Writes `parallel.x`, `parallel.y`, `docs.x.tsv`, `docs.y.tsv` and
    /// `translation.tsv` into `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<SynthFiles> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = SynthFiles {
            parallel_x: dir.join("parallel.x"),
            parallel_y: dir.join("parallel.y"),
            documents_x: dir.join("docs.x.tsv"),
            documents_y: dir.join("docs.y.tsv"),
            translation: dir.join("translation.tsv"),
        };
        let lines =
            |rows: &[Vec<String>]| rows.iter().map(|r| r.join(" ") + "\n").collect::<String>();
        let docs = |rows: &[(String, Vec<String>)]| {
            rows.iter()
                .map(|(l, t)| format!("{l}\t{}\n", t.join(" ")))
                .collect::<String>()
        };
        write_file(&files.parallel_x, &lines(&self.parallel_x))?;
        write_file(&files.parallel_y, &lines(&self.parallel_y))?;
        write_file(&files.documents_x, &docs(&self.documents_x))?;
        write_file(&files.documents_y, &docs(&self.documents_y))?;
        let tr: String = self
            .words_x
            .iter()
            .zip(&self.translation)
            .map(|(x, &j)| format!("{x}\t{}\n", self.words_y[j]))
            .collect();
        write_file(&files.translation, &tr)?;
        Ok(files)
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn shapes_follow_config() {
        let c = generate(&SynthConfig::default()).unwrap();
        assert_eq!(c.parallel_x.len(), 2000);
        assert_eq!(c.documents_y.len(), 800);
        for (x, y) in c.parallel_x.iter().zip(&c.parallel_y) {
            assert!((5..=15).contains(&x.len()));
            assert_eq!(x.len(), y.len());
        }
        let labels: HashSet<&str> = c.documents_x.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels.len(), 4);
    }

    #[test]
    fn y_is_a_renaming_of_x() {
        let c = generate(&SynthConfig::default()).unwrap();
        let mut seen: Vec<usize> = c.translation.clone();
        seen.sort();
        assert_eq!(seen, (0..60).collect::<Vec<_>>());
        for (x, y) in c.parallel_x.iter().zip(&c.parallel_y) {
            let mut tx: Vec<&str> = x.iter().map(|w| c.translate(w).unwrap()).collect();
            let mut ty: Vec<&str> = y.iter().map(String::as_str).collect();
            tx.sort();
            ty.sort();
            assert_eq!(tx, ty);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate(&SynthConfig::default()).unwrap();
        let b = generate(&SynthConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig {
            permutation_seed: 1,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_ne!(a.translation, c.translation);
    }
}
