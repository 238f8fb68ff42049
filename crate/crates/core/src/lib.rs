//! Bilingual word embeddings learned by a bag-of-words autoencoder.
//!
//! Only sentence-aligned parallel text is needed: each side of a pair is
//! encoded as the sum of its word embeddings and a binary-tree decoder is
//! trained to reconstruct both bags from either encoding. The resulting
//! embedding spaces are aligned across the two languages, which is what makes
//! a document classifier trained in one language usable in the other.
//!
//! The modules follow the pipeline:
//!
//! * [`corpus`] builds vocabularies, bags-of-words and tf-idf documents.
//! * [`tree`] assigns words to leaves of a complete binary tree.
//! * [`model`] holds the encoder, tree decoders, losses and gradients.
//! * [`trainer`] runs SGD with validation-based early stopping.
//! * [`classifier`] embeds documents, trains one-vs-rest linear SVMs and
//!   answers nearest-neighbor and projection queries.
//! * [`checkpoint`] and [`export`] read and write the file formats.
//! * [`synth`] generates a synthetic bilingual corpus with known ground truth.
//!
//! ```
//! use bilae::corpus::{BagOfWords, SentencePair};
//! use bilae::model::{Activation, BilingualModel, ModelConfig};
//!
//! let model = BilingualModel::new(&ModelConfig {
//!     dim: 8,
//!     vocab_x: 5,
//!     vocab_y: 6,
//!     tree_seed_x: 1,
//!     tree_seed_y: 2,
//!     init_seed: 3,
//!     activation: Activation::Tanh,
//! })?;
//! let pair = SentencePair::new(BagOfWords::new(vec![0, 3]), BagOfWords::new(vec![5]));
//! let loss = model.pair_loss(&pair);
//! assert!(loss.total > 0.0);
//! # Ok::<(), bilae::Error>(())
//! ```

pub mod checkpoint;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod export;
pub mod math;
pub mod model;
pub mod synth;
pub mod trainer;
pub mod tree;

pub use corpus::{BagOfWords, Language, SentencePair, Vocabulary, WeightMode};
pub use error::{Error, Result};
pub use model::{Activation, BilingualModel, ModelConfig, TaskWeights};
pub use tree::CodeTree;

// Compile and run the guide's code listings as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/tree.md")]
    mod tree {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
