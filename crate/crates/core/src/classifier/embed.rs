use crate::corpus::{Document, Language};
use crate::error::{Error, Result};
use crate::math::axpy;
use crate::model::Embeddings;

/// A document mapped into the embedding space.
#[derive(Clone, Debug, PartialEq)]
pub struct DocEmbedding {
    pub vector: Vec<f64>,
    pub label: usize,
    pub language: Language,
    pub degenerate: bool,
}

/// `W · weights` for every document. No nonlinearity and no hidden bias
/// are applied.
pub fn embed_documents(docs: &[Document], embeddings: &Embeddings) -> Result<Vec<DocEmbedding>> {
    docs.iter().map(|d| embed_document(d, embeddings)).collect()
}

pub fn embed_document(doc: &Document, embeddings: &Embeddings) -> Result<DocEmbedding> {
    let mut vector = vec![0.0; embeddings.dim()];
    for &(w, weight) in &doc.weights {
        if w >= embeddings.words() {
            return Err(Error::IndexOutOfRange {
                index: w,
                size: embeddings.words(),
            });
        }
        axpy(weight, embeddings.column(w), &mut vector);
    }
    Ok(DocEmbedding {
        vector,
        label: doc.label,
        language: doc.language,
        degenerate: doc.degenerate,
    })
}
