//! Cross-lingual document classification and embedding-space queries.
//!
//! A document is embedded as `W · weights`, where the weights are its tf-idf
//! or binary bag-of-words vector. A classifier trained on documents of one
//! language, embedded with that language's `W`, is applied unchanged to
//! documents of the other language embedded with the other `W`.

mod embed;
mod neighbors;
mod projection;
mod svm;

pub use embed::{embed_document, embed_documents, DocEmbedding};
pub use neighbors::{nearest_by_index, nearest_neighbors, Neighbor};
pub use projection::{principal_projection, project_2d, ProjectedWord};
pub use svm::{
    evaluate, train_fixed_c, train_svm, Evaluation, LinearSvm, SvmConfig, DEFAULT_C_GRID,
};

use crate::checkpoint::Checkpoint;
use crate::corpus::{tfidf, LabelSet, Language, RawDocument, Split, WeightMode};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CrossLingualConfig {
    pub c_grid: Vec<f64>,
    /// Candidate document weightings, compared on the source validation split.
    pub modes: Vec<WeightMode>,
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub svm: SvmConfig,
}

impl Default for CrossLingualConfig {
    fn default() -> Self {
        CrossLingualConfig {
            c_grid: DEFAULT_C_GRID.to_vec(),
            modes: WeightMode::ALL.to_vec(),
            train_fraction: 0.70,
            valid_fraction: 0.15,
            svm: SvmConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossLingualReport {
    pub source: Language,
    pub target: Language,
    pub labels: LabelSet,
    pub mode: WeightMode,
    pub c: f64,
    pub valid_error: f64,
    /// Error on the source language's own test split.
    pub source_test: Evaluation,
    /// Error on the target language's test split: the cross-lingual result.
    pub target_test: Evaluation,
    pub svm: LinearSvm,
}

impl CrossLingualReport {
    pub fn render_text(&self) -> String {
        format!(
            "train language: {}\ntest language: {}\nmode: {}\nC: {}\nvalidation error: {:.4}\n\
             in-language test error: {:.4}\n\n{}",
            self.source,
            self.target,
            self.mode,
            self.c,
            self.valid_error,
            self.source_test.error,
            self.target_test.render_text(self.labels.names()),
        )
    }

    pub fn render_kv(&self) -> String {
        format!(
            "train_language={}\ntest_language={}\nmode={}\nC={}\nvalid_error={}\nsource_test_error={}\n{}",
            self.source,
            self.target,
            self.mode,
            self.c,
            self.valid_error,
            self.source_test.error,
            self.target_test.render_kv(self.labels.names()),
        )
    }
}

/// Trains on `source_docs` (embedded with the source language's `W`),
/// selects the weighting mode and `C` on the source validation split, and
/// evaluates on the test split of `target_docs` (embedded with the target
/// language's `W`).
///
/// Both document lists are split in order into train/validation/test.
pub fn cross_lingual(
    checkpoint: &Checkpoint,
    source: Language,
    source_docs: &[RawDocument],
    target_docs: &[RawDocument],
    config: &CrossLingualConfig,
) -> Result<CrossLingualReport> {
    if config.modes.is_empty() {
        return Err(Error::invalid("no weighting mode to choose from"));
    }
    let target = source.other();
    let labels = LabelSet::from_names(
        source_docs
            .iter()
            .chain(target_docs)
            .map(|d| d.label.as_str()),
    );
    let labeled = |docs: &[RawDocument]| -> Vec<(Vec<String>, usize)> {
        docs.iter()
            .map(|d| (d.tokens.clone(), labels.id(&d.label).expect("label in set")))
            .collect()
    };
    let src_raw = labeled(source_docs);
    let tgt_raw = labeled(target_docs);
    let src_split =
        Split::by_fractions(src_raw.len(), config.train_fraction, config.valid_fraction);
    let tgt_split =
        Split::by_fractions(tgt_raw.len(), config.train_fraction, config.valid_fraction);

    let w_src = checkpoint.model.embeddings(source);
    let w_tgt = checkpoint.model.embeddings(target);

    let mut best: Option<(WeightMode, LinearSvm, f64)> = None;
    for &mode in &config.modes {
        let set = tfidf(&src_raw, checkpoint.vocab(source), mode, source);
        let train = embed_documents(set.slice(src_split.train.clone()), w_src)?;
        let valid = embed_documents(set.slice(src_split.valid.clone()), w_src)?;
        let (mut svm, err) = train_svm(&train, &valid, &config.c_grid, &config.svm)?;
        svm.mode = Some(mode);
        if best.as_ref().is_none_or(|(_, _, e)| err < *e) {
            best = Some((mode, svm, err));
        }
    }
    let (mode, svm, valid_error) = best.expect("at least one mode");

    let src_set = tfidf(&src_raw, checkpoint.vocab(source), mode, source);
    let source_test = evaluate(
        &svm,
        &embed_documents(src_set.slice(src_split.test), w_src)?,
    )?;
    let tgt_set = tfidf(&tgt_raw, checkpoint.vocab(target), mode, target);
    let target_test = evaluate(
        &svm,
        &embed_documents(tgt_set.slice(tgt_split.test), w_tgt)?,
    )?;

    Ok(CrossLingualReport {
        source,
        target,
        labels,
        mode,
        c: svm.c,
        valid_error,
        source_test,
        target_test,
        svm,
    })
}
