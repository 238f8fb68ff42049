//! Plain stochastic gradient descent with early stopping.
//!
//! One pair per step, the four task gradients summed into a single update.
//! The pair order is reshuffled every epoch from `shuffle_seed + epoch`.
//! Every `eval_every` pairs the mean pair loss over the validation set is
//! computed; the parameters with the lowest validation loss seen so far are
//! what [`train`] returns.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::corpus::{SentencePair, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Activation, BilingualModel, ModelConfig, TaskWeights};

/// Relative decrease of the validation loss that counts as an improvement.
pub const MIN_RELATIVE_IMPROVEMENT: f64 = 1e-6;

/// Where validation pairs come from.
#[derive(Clone, Debug, PartialEq)]
pub enum Validation {
    /// The last fraction of the pair list (taken before any shuffling).
    Fraction(f64),
    /// A separate list; all input pairs are then used for training.
    Pairs(Vec<SentencePair>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub epochs_max: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub validation: Validation,
    pub shuffle_seed: u64,
    pub init_seed: u64,
    pub tree_seed_x: u64,
    pub tree_seed_y: u64,
    pub task_weights: TaskWeights,
    /// Pairs between evaluations; `None` evaluates once per epoch.
    pub eval_every: Option<usize>,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 40,
            learning_rate: 0.01,
            epochs_max: 50,
            patience: 5,
            validation: Validation::Fraction(0.05),
            shuffle_seed: 1,
            init_seed: 1,
            tree_seed_x: 1,
            tree_seed_y: 2,
            task_weights: TaskWeights::default(),
            eval_every: None,
            activation: Activation::Tanh,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if let Validation::Fraction(f) = self.validation {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid("validation fraction must be in (0, 1)"));
            }
        }
        if self.eval_every == Some(0) {
            return Err(Error::invalid("eval_every must be positive"));
        }
        self.task_weights.validate()
    }

    pub fn model_config(&self, vocab_x: usize, vocab_y: usize) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            vocab_x,
            vocab_y,
            tree_seed_x: self.tree_seed_x,
            tree_seed_y: self.tree_seed_y,
            init_seed: self.init_seed,
            activation: self.activation,
        }
    }
}

/// One validation pass.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub pairs_seen: usize,
    /// Mean training pair loss since the previous evaluation (NaN for the
    /// evaluation of the initial model).
    pub train_loss: f64,
    /// Mean weighted pair loss over the validation set.
    pub valid_loss: f64,
    /// Mean per-task validation losses, `[x→x, y→y, x→y, y→x]`.
    pub valid_parts: [f64; 4],
}

impl EvalRecord {
    /// `pairs_seen\ttrain_loss\tvalid_loss\tl_xx\tl_yy\tl_xy\tl_yx`
    pub fn log_line(&self) -> String {
        let p = &self.valid_parts;
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.pairs_seen, self.train_loss, self.valid_loss, p[0], p[1], p[2], p[3]
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    EpochsMax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub evaluations: Vec<EvalRecord>,
    pub best_validation_loss: Option<f64>,
    pub best_pairs_seen: Option<usize>,
    /// Validation loss of the parameters at the moment training stopped.
    pub final_validation_loss: Option<f64>,
    pub stopped_reason: StopReason,
    pub train_pairs: usize,
    pub valid_pairs: usize,
}

impl TrainReport {
    pub fn initial_validation_loss(&self) -> Option<f64> {
        self.evaluations.first().map(|e| e.valid_loss)
    }
}

/// Hook called after every validation pass.
pub trait TrainObserver {
    fn on_evaluation(
        &mut self,
        record: &EvalRecord,
        model: &BilingualModel,
        improved: bool,
    ) -> Result<()>;
}

impl TrainObserver for () {
    fn on_evaluation(&mut self, _: &EvalRecord, _: &BilingualModel, _: bool) -> Result<()> {
        Ok(())
    }
}

/// Appends evaluation lines to a log file and writes a checkpoint named
/// `checkpoint-<pairs_seen>.bin` whenever validation loss improves.
pub struct FileObserver {
    checkpoint_dir: PathBuf,
    log_path: PathBuf,
    log: File,
    vocab_x: Vocabulary,
    vocab_y: Vocabulary,
    pub written: Vec<PathBuf>,
}

impl FileObserver {
    pub fn new(
        checkpoint_dir: impl Into<PathBuf>,
        log_path: impl Into<PathBuf>,
        vocab_x: Vocabulary,
        vocab_y: Vocabulary,
    ) -> Result<Self> {
        let checkpoint_dir = checkpoint_dir.into();
        let log_path = log_path.into();
        fs::create_dir_all(&checkpoint_dir).map_err(|e| Error::io(&checkpoint_dir, e))?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        Ok(FileObserver {
            checkpoint_dir,
            log_path,
            log,
            vocab_x,
            vocab_y,
            written: Vec::new(),
        })
    }
}

impl TrainObserver for FileObserver {
    fn on_evaluation(
        &mut self,
        record: &EvalRecord,
        model: &BilingualModel,
        improved: bool,
    ) -> Result<()> {
        writeln!(self.log, "{}", record.log_line()).map_err(|e| Error::io(&self.log_path, e))?;
        if improved {
            let path = self
                .checkpoint_dir
                .join(format!("checkpoint-{:010}.bin", record.pairs_seen));
            Checkpoint::new(model.clone(), self.vocab_x.clone(), self.vocab_y.clone())?
                .save(&path)?;
            self.written.push(path);
        }
        Ok(())
    }
}

/// Trains a freshly initialized model on `pairs`.
pub fn train(
    pairs: &[SentencePair],
    vocab_sizes: (usize, usize),
    config: &TrainConfig,
) -> Result<(BilingualModel, TrainReport)> {
    train_with_observer(pairs, vocab_sizes, config, &mut ())
}

pub fn train_with_observer(
    pairs: &[SentencePair],
    vocab_sizes: (usize, usize),
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(BilingualModel, TrainReport)> {
    config.validate()?;
    let model = BilingualModel::new(&config.model_config(vocab_sizes.0, vocab_sizes.1))?;
    train_model(model, pairs, config, observer)
}

/// Continues training `model`. Only the optimization settings of `config`
/// are used; dimensions and seeds come from the model.
pub fn train_model(
    mut model: BilingualModel,
    pairs: &[SentencePair],
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(BilingualModel, TrainReport)> {
    config.validate()?;
    let (train_set, valid_set): (&[SentencePair], &[SentencePair]) = match &config.validation {
        Validation::Pairs(v) => (pairs, v),
        Validation::Fraction(f) => {
            let n_valid = ((pairs.len() as f64) * f).ceil() as usize;
            pairs.split_at(pairs.len().saturating_sub(n_valid))
        }
    };
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::invalid(
            "need at least one training pair and one validation pair",
        ));
    }
    for p in train_set.iter().chain(valid_set) {
        check_pair(&model, p)?;
    }

    let mut report = TrainReport {
        evaluations: Vec::new(),
        best_validation_loss: None,
        best_pairs_seen: None,
        final_validation_loss: None,
        stopped_reason: StopReason::EpochsMax,
        train_pairs: train_set.len(),
        valid_pairs: valid_set.len(),
    };
    if config.epochs_max == 0 {
        return Ok((model, report));
    }

    let weights = &config.task_weights;
    let eval_every = config.eval_every.unwrap_or(train_set.len());

    let initial = evaluate(&model, valid_set, weights, 0, f64::NAN)?;
    let mut best_loss = initial.valid_loss;
    let mut best_model = model.clone();
    report.best_validation_loss = Some(best_loss);
    report.best_pairs_seen = Some(0);
    observer.on_evaluation(&initial, &model, true)?;
    report.evaluations.push(initial);

    let mut pairs_seen = 0usize;
    let mut window_sum = 0.0;
    let mut window_len = 0usize;
    let mut stale = 0usize;
    let mut last_eval_at = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    'epochs: for epoch in 0..config.epochs_max {
        order.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);

        for &i in &order {
            let (loss, grads) = model.pair_gradients_weighted(&train_set[i], weights);
            if !loss.total.is_finite() {
                return Err(Error::NonFinite {
                    pair: i,
                    block: model.first_non_finite_block().unwrap_or("loss"),
                });
            }
            if let Some(block) = grads.first_non_finite_block() {
                return Err(Error::NonFinite { pair: i, block });
            }
            model.apply_gradients(&grads, config.learning_rate);
            pairs_seen += 1;
            window_sum += loss.total;
            window_len += 1;

            if pairs_seen.is_multiple_of(eval_every) {
                let record = evaluate(
                    &model,
                    valid_set,
                    weights,
                    pairs_seen,
                    window_sum / window_len as f64,
                )?;
                window_sum = 0.0;
                window_len = 0;
                last_eval_at = pairs_seen;
                let improved =
                    record.valid_loss < best_loss - MIN_RELATIVE_IMPROVEMENT * best_loss.abs();
                if improved {
                    best_loss = record.valid_loss;
                    best_model = model.clone();
                    report.best_validation_loss = Some(best_loss);
                    report.best_pairs_seen = Some(pairs_seen);
                    stale = 0;
                } else {
                    stale += 1;
                }
                report.final_validation_loss = Some(record.valid_loss);
                observer.on_evaluation(&record, &model, improved)?;
                report.evaluations.push(record);
                if stale >= config.patience {
                    report.stopped_reason = StopReason::Patience;
                    break 'epochs;
                }
            }
        }
    }

    if last_eval_at != pairs_seen {
        let record = evaluate(
            &model,
            valid_set,
            weights,
            pairs_seen,
            window_sum / window_len.max(1) as f64,
        )?;
        let improved = record.valid_loss < best_loss - MIN_RELATIVE_IMPROVEMENT * best_loss.abs();
        if improved {
            best_loss = record.valid_loss;
            best_model = model.clone();
            report.best_validation_loss = Some(best_loss);
            report.best_pairs_seen = Some(pairs_seen);
        }
        report.final_validation_loss = Some(record.valid_loss);
        observer.on_evaluation(&record, &model, improved)?;
        report.evaluations.push(record);
    }

    Ok((best_model, report))
}

/// Mean pair loss of `model` over `pairs`.
pub fn validation_loss(
    model: &BilingualModel,
    pairs: &[SentencePair],
    weights: &TaskWeights,
) -> Result<f64> {
    Ok(evaluate(model, pairs, weights, 0, f64::NAN)?.valid_loss)
}

fn evaluate(
    model: &BilingualModel,
    pairs: &[SentencePair],
    weights: &TaskWeights,
    pairs_seen: usize,
    train_loss: f64,
) -> Result<EvalRecord> {
    let mut total = 0.0;
    let mut parts = [0.0; 4];
    for p in pairs {
        let l = model.pair_loss(p);
        for (acc, v) in parts.iter_mut().zip(l.parts) {
            *acc += v;
        }
        total += l
            .parts
            .iter()
            .zip(&weights.0)
            .map(|(a, w)| a * w)
            .sum::<f64>();
    }
    let n = pairs.len() as f64;
    let valid_loss = total / n;
    if !valid_loss.is_finite() {
        return Err(Error::NonFinite {
            pair: pairs_seen,
            block: model.first_non_finite_block().unwrap_or("validation loss"),
        });
    }
    Ok(EvalRecord {
        pairs_seen,
        train_loss,
        valid_loss,
        valid_parts: parts.map(|p| p / n),
    })
}

fn check_pair(model: &BilingualModel, pair: &SentencePair) -> Result<()> {
    for (bag, size) in [
        (&pair.source, model.vocab_size(crate::Language::X)),
        (&pair.target, model.vocab_size(crate::Language::Y)),
    ] {
        if let Some(m) = bag.max_index() {
            if m >= size {
                return Err(Error::IndexOutOfRange { index: m, size });
            }
        }
    }
    Ok(())
}
