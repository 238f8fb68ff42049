//! The bilingual bag-of-words autoencoder.
//!
//! A sentence in either language is encoded as the sum of its word
//! embeddings, `φ = Σ W[:, w]`, and passed through `h(c + φ)` where the
//! bias `c` is shared by both languages. Each language has its own tree
//! decoder: the probability of a word is the product of the branching
//! probabilities `σ(b[n] + U[n,:]·h)` along its root-to-leaf path, so the
//! word distribution sums to one by construction and scoring a word costs
//! `O(log V)` instead of `O(V)`.
//!
//! A sentence pair trains four reconstructions: x→x, y→y, x→y and y→x.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{BagOfWords, Language, SentencePair};
use crate::error::{Error, Result};
use crate::math::{axpy, dot, sigmoid, softplus};
use crate::tree::CodeTree;

/// Half-width of the uniform distribution used to initialize embeddings.
pub const INIT_RANGE: f64 = 0.05;

/// Element-wise nonlinearity applied to `c + φ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Identity => a,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - out * out,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::invalid(format!("unknown activation {other:?}"))),
        }
    }
}

/// A `D × V` embedding matrix. Column `w` is stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    dim: usize,
    words: usize,
    data: Vec<f64>,
}

impl Embeddings {
    pub fn zeros(dim: usize, words: usize) -> Self {
        Embeddings {
            dim,
            words,
            data: vec![0.0; dim * words],
        }
    }

    /// Builds from columns, one `dim`-vector per word.
    pub fn from_columns(dim: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let words = columns.len();
        let mut data = Vec::with_capacity(dim * words);
        for col in columns {
            if col.len() != dim {
                return Err(Error::invalid(format!(
                    "embedding column has {} entries, expected {dim}",
                    col.len()
                )));
            }
            data.extend(col);
        }
        Ok(Embeddings { dim, words, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> usize {
        self.words
    }

    #[inline]
    pub fn column(&self, word: usize) -> &[f64] {
        &self.data[word * self.dim..(word + 1) * self.dim]
    }

    #[inline]
    pub fn column_mut(&mut self, word: usize) -> &mut [f64] {
        &mut self.data[word * self.dim..(word + 1) * self.dim]
    }

    /// Word-major storage: all of column 0, then column 1, ...
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Decoder parameters of one language: a bias and a weight row per internal
/// tree node.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    dim: usize,
    bias: Vec<f64>,
    weights: Vec<f64>,
}

impl Decoder {
    pub fn zeros(dim: usize, nodes: usize) -> Self {
        Decoder {
            dim,
            bias: vec![0.0; nodes],
            weights: vec![0.0; nodes * dim],
        }
    }

    pub fn nodes(&self) -> usize {
        self.bias.len()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    #[inline]
    pub fn row(&self, node: usize) -> &[f64] {
        &self.weights[node * self.dim..(node + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.weights[node * self.dim..(node + 1) * self.dim]
    }

    /// Row-major `(V−1) × D` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    fn preactivation(&self, node: usize, hidden: &[f64]) -> f64 {
        self.bias[node] + dot(self.row(node), hidden)
    }
}

/// Shape and seeds of a freshly initialized model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub vocab_x: usize,
    pub vocab_y: usize,
    pub tree_seed_x: u64,
    pub tree_seed_y: u64,
    pub init_seed: u64,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilingualModel {
    dim: usize,
    embed_x: Embeddings,
    embed_y: Embeddings,
    hidden_bias: Vec<f64>,
    decoder_x: Decoder,
    decoder_y: Decoder,
    tree_x: CodeTree,
    tree_y: CodeTree,
    activation: Activation,
}

/// Names of the parameter blocks, in the order used by
/// [`BilingualModel::blocks`] and [`Gradients::dense_blocks`].
pub const BLOCK_NAMES: [&str; 7] = ["W_x", "W_y", "c", "b_x", "U_x", "b_y", "U_y"];

impl BilingualModel {
    /// Embeddings uniform in `±INIT_RANGE` from `ChaCha8Rng(init_seed)`
    /// (all of `W_x`, then all of `W_y`); every other parameter zero.
    pub fn new(config: &ModelConfig) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let dist = Uniform::new_inclusive(-INIT_RANGE, INIT_RANGE)
            .map_err(|e| Error::invalid(e.to_string()))?;
        for v in model
            .embed_x
            .as_mut_slice()
            .iter_mut()
            .chain(model.embed_y.as_mut_slice())
        {
            *v = dist.sample(&mut rng);
        }
        Ok(model)
    }

    /// All parameters zero; trees still built from their seeds.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let tree_x = CodeTree::random(config.vocab_x, config.tree_seed_x)?;
        let tree_y = CodeTree::random(config.vocab_y, config.tree_seed_y)?;
        Ok(BilingualModel {
            dim: config.dim,
            embed_x: Embeddings::zeros(config.dim, config.vocab_x),
            embed_y: Embeddings::zeros(config.dim, config.vocab_y),
            hidden_bias: vec![0.0; config.dim],
            decoder_x: Decoder::zeros(config.dim, tree_x.internal_count()),
            decoder_y: Decoder::zeros(config.dim, tree_y.internal_count()),
            tree_x,
            tree_y,
            activation: config.activation,
        })
    }

    /// Assembles a model from explicit parameters, checking every dimension.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        embed_x: Embeddings,
        embed_y: Embeddings,
        hidden_bias: Vec<f64>,
        decoder_x: Decoder,
        decoder_y: Decoder,
        tree_x: CodeTree,
        tree_y: CodeTree,
        activation: Activation,
    ) -> Result<Self> {
        let dim = hidden_bias.len();
        let consistent = dim > 0
            && embed_x.dim == dim
            && embed_y.dim == dim
            && decoder_x.dim == dim
            && decoder_y.dim == dim
            && embed_x.words == tree_x.vocab_size()
            && embed_y.words == tree_y.vocab_size()
            && decoder_x.nodes() == tree_x.internal_count()
            && decoder_y.nodes() == tree_y.internal_count()
            && decoder_x.weights.len() == decoder_x.nodes() * dim
            && decoder_y.weights.len() == decoder_y.nodes() * dim;
        if !consistent {
            return Err(Error::invalid("inconsistent model dimensions"));
        }
        Ok(BilingualModel {
            dim,
            embed_x,
            embed_y,
            hidden_bias,
            decoder_x,
            decoder_y,
            tree_x,
            tree_y,
            activation,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self, language: Language) -> usize {
        self.tree(language).vocab_size()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn embeddings(&self, language: Language) -> &Embeddings {
        match language {
            Language::X => &self.embed_x,
            Language::Y => &self.embed_y,
        }
    }

    pub fn embeddings_mut(&mut self, language: Language) -> &mut Embeddings {
        match language {
            Language::X => &mut self.embed_x,
            Language::Y => &mut self.embed_y,
        }
    }

    pub fn decoder(&self, language: Language) -> &Decoder {
        match language {
            Language::X => &self.decoder_x,
            Language::Y => &self.decoder_y,
        }
    }

    pub fn decoder_mut(&mut self, language: Language) -> &mut Decoder {
        match language {
            Language::X => &mut self.decoder_x,
            Language::Y => &mut self.decoder_y,
        }
    }

    pub fn tree(&self, language: Language) -> &CodeTree {
        match language {
            Language::X => &self.tree_x,
            Language::Y => &self.tree_y,
        }
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_bias
    }

    /// The parameter blocks in [`BLOCK_NAMES`] order.
    pub fn blocks(&self) -> [&[f64]; 7] {
        [
            self.embed_x.as_slice(),
            self.embed_y.as_slice(),
            &self.hidden_bias,
            &self.decoder_x.bias,
            &self.decoder_x.weights,
            &self.decoder_y.bias,
            &self.decoder_y.weights,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 7] {
        [
            self.embed_x.as_mut_slice(),
            self.embed_y.as_mut_slice(),
            &mut self.hidden_bias,
            &mut self.decoder_x.bias,
            &mut self.decoder_x.weights,
            &mut self.decoder_y.bias,
            &mut self.decoder_y.weights,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// Name of the first block holding a NaN or infinity.
    pub fn first_non_finite_block(&self) -> Option<&'static str> {
        self.blocks()
            .iter()
            .zip(BLOCK_NAMES)
            .find(|(b, _)| b.iter().any(|v| !v.is_finite()))
            .map(|(_, n)| n)
    }

    /// Sentence representation: `φ` is the sum of the bag's embedding
    /// columns and `hidden = h(c + φ)`.
    ///
    /// Columns are summed in ascending word order, so any permutation of the
    /// bag gives a bit-identical result.
    pub fn encode(&self, bag: &BagOfWords, language: Language) -> Result<EncodedSentence> {
        let embed = self.embeddings(language);
        if let Some(max) = bag.max_index() {
            if max >= embed.words {
                return Err(Error::IndexOutOfRange {
                    index: max,
                    size: embed.words,
                });
            }
        }
        Ok(self.encode_counts(&bag.counts(), language))
    }

    fn encode_counts(&self, counts: &[(usize, usize)], language: Language) -> EncodedSentence {
        let embed = self.embeddings(language);
        let mut phi = vec![0.0; self.dim];
        for &(w, n) in counts {
            let col = embed.column(w);
            for _ in 0..n {
                for (p, v) in phi.iter_mut().zip(col) {
                    *p += v;
                }
            }
        }
        let hidden = phi
            .iter()
            .zip(&self.hidden_bias)
            .map(|(p, c)| self.activation.apply(c + p))
            .collect();
        EncodedSentence {
            phi,
            hidden,
            language,
        }
    }

    /// Probability of branching right (bit 1) at `node`.
    ///
    /// # Panics
    ///
    /// If `node` is not an internal node of the language's tree.
    pub fn branch_prob(&self, node: usize, hidden: &[f64], language: Language) -> f64 {
        sigmoid(self.decoder(language).preactivation(node, hidden))
    }

    /// `log p(word | hidden)`, accumulated along the word's path with
    /// log-sigmoid terms.
    ///
    /// # Panics
    ///
    /// If `word` is outside the language's vocabulary.
    pub fn word_log_prob(&self, word: usize, hidden: &[f64], language: Language) -> f64 {
        let decoder = self.decoder(language);
        self.tree(language)
            .path_of(word)
            .steps()
            .map(|(node, bit)| {
                let a = decoder.preactivation(node, hidden);
                // log σ(a) for bit 1, log(1 − σ(a)) = log σ(−a) for bit 0
                if bit == 1 {
                    -softplus(-a)
                } else {
                    -softplus(a)
                }
            })
            .sum()
    }

    /// Negative log-likelihood of every token of `target` (duplicates
    /// counted) under the decoder of `target_language`.
    pub fn recon_loss(
        &self,
        target: &BagOfWords,
        target_language: Language,
        enc: &EncodedSentence,
    ) -> f64 {
        self.recon_loss_traced(target, target_language, enc).0
    }

    /// [`recon_loss`](Self::recon_loss) plus the number of decoder rows read.
    ///
    /// Paths of different tokens share internal nodes near the root; each
    /// node is evaluated once with its left/right visit counts, so the count
    /// returned is the number of distinct nodes on the union of the paths.
    pub fn recon_loss_traced(
        &self,
        target: &BagOfWords,
        target_language: Language,
        enc: &EncodedSentence,
    ) -> (f64, usize) {
        let tallies = node_tallies(self.tree(target_language), &target.counts());
        let loss = decode(
            self.decoder(target_language),
            &tallies,
            &enc.hidden,
            1.0,
            None,
        );
        (loss, tallies.len())
    }

    /// The four reconstruction losses of a pair, summed with unit weights.
    pub fn pair_loss(&self, pair: &SentencePair) -> PairLoss {
        self.forward_backward(pair, &TaskWeights::default(), false)
            .0
    }

    /// Exact gradient of `pair_loss(pair).total`.
    pub fn pair_gradients(&self, pair: &SentencePair) -> Gradients {
        self.pair_gradients_weighted(pair, &TaskWeights::default())
            .1
    }

    /// Loss and gradient of `Σ weights[t] · parts[t]`.
    pub fn pair_gradients_weighted(
        &self,
        pair: &SentencePair,
        weights: &TaskWeights,
    ) -> (PairLoss, Gradients) {
        let (loss, grads) = self.forward_backward(pair, weights, true);
        (loss, grads.expect("gradients requested"))
    }

    fn forward_backward(
        &self,
        pair: &SentencePair,
        weights: &TaskWeights,
        want_grad: bool,
    ) -> (PairLoss, Option<Gradients>) {
        let counts_x = pair.source.counts();
        let counts_y = pair.target.counts();
        let enc_x = self.encode_counts(&counts_x, Language::X);
        let enc_y = self.encode_counts(&counts_y, Language::Y);
        let tallies_x = node_tallies(&self.tree_x, &counts_x);
        let tallies_y = node_tallies(&self.tree_y, &counts_y);

        let mut grads = want_grad.then(|| Gradients::empty(self.dim));
        let mut dhid_x = vec![0.0; self.dim];
        let mut dhid_y = vec![0.0; self.dim];

        let mut parts = [0.0; 4];
        for task in Task::ALL {
            let (src, tgt) = task.languages();
            let enc = if src == Language::X { &enc_x } else { &enc_y };
            let tallies = if tgt == Language::X {
                &tallies_x
            } else {
                &tallies_y
            };
            let w = weights.0[task as usize];
            let back = grads.as_mut().map(|g| {
                let dec = match tgt {
                    Language::X => &mut g.decoder_x,
                    Language::Y => &mut g.decoder_y,
                };
                let dh = if src == Language::X {
                    &mut dhid_x
                } else {
                    &mut dhid_y
                };
                (dec, dh)
            });
            parts[task as usize] = decode(self.decoder(tgt), tallies, &enc.hidden, w, back);
        }

        let total = parts.iter().zip(&weights.0).map(|(p, w)| p * w).sum();

        if let Some(g) = grads.as_mut() {
            for (enc, dhid, counts) in [(&enc_x, &dhid_x, &counts_x), (&enc_y, &dhid_y, &counts_y)]
            {
                // dL/da for a = c + φ
                let da: Vec<f64> = dhid
                    .iter()
                    .zip(&enc.hidden)
                    .map(|(d, h)| d * self.activation.derivative_from_output(*h))
                    .collect();
                axpy(1.0, &da, &mut g.hidden_bias);
                let embed = match enc.language {
                    Language::X => &mut g.embed_x,
                    Language::Y => &mut g.embed_y,
                };
                for &(word, n) in counts.iter() {
                    let col = embed.entry(word).or_insert_with(|| vec![0.0; self.dim]);
                    axpy(n as f64, &da, col);
                }
            }
        }

        (PairLoss { total, parts }, grads)
    }

    /// Plain SGD step: `θ ← θ − lr · g`, touching only the rows present in
    /// `grads`.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (lang, rows) in [(Language::X, &grads.embed_x), (Language::Y, &grads.embed_y)] {
            let embed = self.embeddings_mut(lang);
            for (&w, g) in rows {
                axpy(-lr, g, embed.column_mut(w));
            }
        }
        axpy(-lr, &grads.hidden_bias, &mut self.hidden_bias);
        for (lang, rows) in [
            (Language::X, &grads.decoder_x),
            (Language::Y, &grads.decoder_y),
        ] {
            let dec = self.decoder_mut(lang);
            for (&n, g) in rows {
                dec.bias[n] -= lr * g.bias;
                axpy(-lr, &g.weights, dec.row_mut(n));
            }
        }
    }
}

/// Output of [`BilingualModel::encode`].
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSentence {
    pub phi: Vec<f64>,
    pub hidden: Vec<f64>,
    pub language: Language,
}

/// The four reconstruction tasks, in the order their losses are reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    XToX = 0,
    YToY = 1,
    XToY = 2,
    YToX = 3,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::XToX, Task::YToY, Task::XToY, Task::YToX];

    /// `(encoder language, decoder language)`.
    pub fn languages(self) -> (Language, Language) {
        match self {
            Task::XToX => (Language::X, Language::X),
            Task::YToY => (Language::Y, Language::Y),
            Task::XToY => (Language::X, Language::Y),
            Task::YToX => (Language::Y, Language::X),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::XToX => "l_xx",
            Task::YToY => "l_yy",
            Task::XToY => "l_xy",
            Task::YToX => "l_yx",
        }
    }
}

/// Per-task loss coefficients in [`Task::ALL`] order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskWeights(pub [f64; 4]);

impl Default for TaskWeights {
    fn default() -> Self {
        TaskWeights([1.0; 4])
    }
}

impl TaskWeights {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(
                "task weights must be finite and non-negative",
            ));
        }
        if self.0.iter().all(|w| *w == 0.0) {
            return Err(Error::invalid("task weights are all zero"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairLoss {
    pub total: f64,
    /// `[x→x, y→y, x→y, y→x]`
    pub parts: [f64; 4],
}

/// Gradient of one internal node's decoder parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeGrad {
    pub bias: f64,
    pub weights: Vec<f64>,
}

/// Sparse gradient of a pair loss: only embedding columns of words in the
/// pair and decoder rows on their paths are present; `c` is dense.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub embed_x: BTreeMap<usize, Vec<f64>>,
    pub embed_y: BTreeMap<usize, Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    pub decoder_x: BTreeMap<usize, NodeGrad>,
    pub decoder_y: BTreeMap<usize, NodeGrad>,
}

impl Gradients {
    fn empty(dim: usize) -> Self {
        Gradients {
            embed_x: BTreeMap::new(),
            embed_y: BTreeMap::new(),
            hidden_bias: vec![0.0; dim],
            decoder_x: BTreeMap::new(),
            decoder_y: BTreeMap::new(),
        }
    }

    /// Name of the first block containing a non-finite entry.
    pub fn first_non_finite_block(&self) -> Option<&'static str> {
        let bad = |v: &[f64]| v.iter().any(|x| !x.is_finite());
        if self.embed_x.values().any(|v| bad(v)) {
            return Some("W_x");
        }
        if self.embed_y.values().any(|v| bad(v)) {
            return Some("W_y");
        }
        if bad(&self.hidden_bias) {
            return Some("c");
        }
        for (names, rows) in [
            (["b_x", "U_x"], &self.decoder_x),
            (["b_y", "U_y"], &self.decoder_y),
        ] {
            for g in rows.values() {
                if !g.bias.is_finite() {
                    return Some(names[0]);
                }
                if bad(&g.weights) {
                    return Some(names[1]);
                }
            }
        }
        None
    }

    /// Expands to dense vectors laid out like [`BilingualModel::blocks`].
    pub fn dense_blocks(&self, model: &BilingualModel) -> [Vec<f64>; 7] {
        let d = model.dim();
        let mut out = model.blocks().map(|b| vec![0.0; b.len()]);
        for (w, g) in &self.embed_x {
            out[0][w * d..(w + 1) * d].copy_from_slice(g);
        }
        for (w, g) in &self.embed_y {
            out[1][w * d..(w + 1) * d].copy_from_slice(g);
        }
        out[2].copy_from_slice(&self.hidden_bias);
        for (bi, wi, rows) in [(3, 4, &self.decoder_x), (5, 6, &self.decoder_y)] {
            for (n, g) in rows {
                out[bi][*n] = g.bias;
                out[wi][n * d..(n + 1) * d].copy_from_slice(&g.weights);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        let z = |v: &[f64]| v.iter().all(|x| *x == 0.0);
        self.embed_x.values().all(|v| z(v))
            && self.embed_y.values().all(|v| z(v))
            && z(&self.hidden_bias)
            && self
                .decoder_x
                .values()
                .chain(self.decoder_y.values())
                .all(|g| g.bias == 0.0 && z(&g.weights))
    }
}

/// How often the paths of a target bag go left and right at one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct NodeTally {
    node: usize,
    left: usize,
    right: usize,
}

fn node_tallies(tree: &CodeTree, counts: &[(usize, usize)]) -> Vec<NodeTally> {
    let mut steps: Vec<(usize, u8, usize)> = Vec::new();
    for &(word, n) in counts {
        steps.extend(tree.path_of(word).steps().map(|(node, bit)| (node, bit, n)));
    }
    steps.sort_unstable_by_key(|&(node, bit, _)| (node, bit));
    let mut out: Vec<NodeTally> = Vec::new();
    for (node, bit, n) in steps {
        let t = match out.last_mut() {
            Some(t) if t.node == node => t,
            _ => {
                out.push(NodeTally {
                    node,
                    left: 0,
                    right: 0,
                });
                out.last_mut().unwrap()
            }
        };
        if bit == 1 {
            t.right += n;
        } else {
            t.left += n;
        }
    }
    out
}

/// Unweighted loss of `tallies`; when `back` is given, accumulates
/// `weight ×` its gradient into the decoder gradient and `dL/dhidden`.
fn decode(
    decoder: &Decoder,
    tallies: &[NodeTally],
    hidden: &[f64],
    weight: f64,
    back: Option<(&mut BTreeMap<usize, NodeGrad>, &mut Vec<f64>)>,
) -> f64 {
    let mut loss = 0.0;
    let mut back = back;
    for t in tallies {
        let a = decoder.preactivation(t.node, hidden);
        // −log σ(a) = softplus(−a), −log(1 − σ(a)) = softplus(a)
        loss += t.right as f64 * softplus(-a) + t.left as f64 * softplus(a);
        if let Some((dec_grad, dhid)) = back.as_mut() {
            if weight == 0.0 {
                continue;
            }
            let g = weight * ((t.left + t.right) as f64 * sigmoid(a) - t.right as f64);
            let entry = dec_grad.entry(t.node).or_insert_with(|| NodeGrad {
                bias: 0.0,
                weights: vec![0.0; hidden.len()],
            });
            entry.bias += g;
            axpy(g, hidden, &mut entry.weights);
            axpy(g, decoder.row(t.node), dhid);
        }
    }
    loss
}
