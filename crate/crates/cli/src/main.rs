//! `bilae` command-line driver.

mod settings;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use bilae::checkpoint::Checkpoint;
use bilae::classifier::{
    cross_lingual, nearest_neighbors, project_2d, CrossLingualConfig, SvmConfig,
};
use bilae::corpus::{
    load_parallel, read_labeled_documents, read_token_lines, Language, Vocabulary, WeightMode,
};
use bilae::export::{save_embeddings, save_projection};
use bilae::model::{Activation, TaskWeights};
use bilae::synth::{generate, SynthConfig};
use bilae::trainer::{train_with_observer, FileObserver, TrainConfig, Validation};
use clap::{Parser, Subcommand};

use settings::{List, Settings};

#[derive(Parser)]
#[command(
    name = "bilae",
    version,
    about = "Bilingual word embeddings from a bag-of-words autoencoder"
)]
struct Cli {
    /// key=value file supplying any flag of the subcommand; flags given on
    /// the command line take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a vocabulary file (`<token> <count>` lines) from a text file
    Vocab(VocabArgs),
    /// Generate the synthetic bilingual corpus with known translations
    Synth(SynthArgs),
    /// Train bilingual embeddings on a line-aligned parallel corpus
    Train(TrainArgs),
    /// Train a document classifier in one language, test it in the other
    Classify(ClassifyArgs),
    /// Print the nearest neighbors of a word
    Nn(NnArgs),
    /// Write both embedding matrices as text
    Export(ExportArgs),
    /// Write a 2-D PCA projection of the most frequent words
    Project(ProjectArgs),
}

#[derive(clap::Args)]
struct VocabArgs {
    /// Tokenized text, one sentence per line (required)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output vocabulary file (required)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop tokens seen fewer times [default: 1]
    #[arg(long)]
    min_count: Option<u64>,
    /// Keep at most this many tokens [default: unlimited]
    #[arg(long)]
    max_size: Option<usize>,
    /// Lowercase tokens before counting [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    lowercase: Option<bool>,
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Output directory (required)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Words per language [default: 60]
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Number of topics [default: 4]
    #[arg(long)]
    topics: Option<usize>,
    /// Parallel sentences [default: 2000]
    #[arg(long)]
    sentences: Option<usize>,
    /// Labeled documents per language [default: 800]
    #[arg(long)]
    documents: Option<usize>,
    /// Exponent of the within-topic word weights 1/rank^s [default: 2]
    #[arg(long)]
    zipf_exponent: Option<f64>,
    /// Probability of a uniformly drawn background token [default: 0.1]
    #[arg(long)]
    background: Option<f64>,
    /// Seed for topics, sentences and documents [default: 2024]
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the X to Y renaming [default: 99]
    #[arg(long)]
    permutation_seed: Option<u64>,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Language X side of the parallel corpus (required)
    #[arg(long)]
    source: Option<PathBuf>,
    /// Language Y side, line-aligned with --source (required)
    #[arg(long)]
    target: Option<PathBuf>,
    /// Output directory (required)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Vocabulary file for X [default: built from --source]
    #[arg(long)]
    vocab_x: Option<PathBuf>,
    /// Vocabulary file for Y [default: built from --target]
    #[arg(long)]
    vocab_y: Option<PathBuf>,
    /// Minimum count when building vocabularies [default: 1]
    #[arg(long)]
    min_count: Option<u64>,
    /// Maximum size when building vocabularies [default: unlimited]
    #[arg(long)]
    max_vocab: Option<usize>,
    /// Lowercase tokens [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    lowercase: Option<bool>,
    /// Embedding dimension [default: 40]
    #[arg(long)]
    dim: Option<usize>,
    /// SGD step size [default: 0.01]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Maximum passes over the training pairs [default: 50]
    #[arg(long)]
    epochs_max: Option<usize>,
    /// Evaluations without improvement before stopping [default: 5]
    #[arg(long)]
    patience: Option<usize>,
    /// Pairs between validation passes [default: one epoch]
    #[arg(long)]
    eval_every: Option<usize>,
    /// Fraction of pairs (taken from the end) held out for validation [default: 0.05]
    #[arg(long)]
    valid_fraction: Option<f64>,
    /// Separate validation corpus, X side [default: none]
    #[arg(long, requires = "valid_target")]
    valid_source: Option<PathBuf>,
    /// Separate validation corpus, Y side [default: none]
    #[arg(long, requires = "valid_source")]
    valid_target: Option<PathBuf>,
    /// Weights of the x->x, y->y, x->y, y->x losses [default: 1,1,1,1]
    #[arg(long)]
    task_weights: Option<List<f64>>,
    /// Hidden activation, tanh or identity [default: tanh]
    #[arg(long)]
    activation: Option<Activation>,
    /// Base seed: init and shuffle use it, the X tree uses it and the Y tree uses it + 1 [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter initialization seed [default: --seed]
    #[arg(long)]
    init_seed: Option<u64>,
    /// Pair shuffling seed [default: --seed]
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Code tree seed for X [default: --seed]
    #[arg(long)]
    tree_seed_x: Option<u64>,
    /// Code tree seed for Y [default: --seed + 1]
    #[arg(long)]
    tree_seed_y: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Direction {
    XToY,
    YToX,
    Both,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "x2y" => Ok(Direction::XToY),
            "y2x" => Ok(Direction::YToX),
            "both" => Ok(Direction::Both),
            _ => Err(format!("expected x2y, y2x or both, got {s:?}")),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::XToY => "x2y",
            Direction::YToX => "y2x",
            Direction::Both => "both",
        })
    }
}

#[derive(clap::Args)]
struct ClassifyArgs {
    /// Trained checkpoint (required)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Labeled X documents, `label<TAB>tokens` per line (required)
    #[arg(long)]
    docs_x: Option<PathBuf>,
    /// Labeled Y documents (required)
    #[arg(long)]
    docs_y: Option<PathBuf>,
    /// Output directory (required)
    #[arg(long)]
    out: Option<PathBuf>,
    /// x2y trains on X and tests on Y, y2x the reverse, both runs each [default: x2y]
    #[arg(long)]
    direction: Option<Direction>,
    /// Document weighting: tfidf, binary or auto (chosen on validation) [default: auto]
    #[arg(long)]
    mode: Option<String>,
    /// SVM regularization values tried on validation [default: 0.01,0.1,1,10]
    #[arg(long)]
    c_grid: Option<List<f64>>,
    /// Leading fraction of each document file used for training [default: 0.7]
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Following fraction used for validation; the rest is test [default: 0.15]
    #[arg(long)]
    valid_fraction: Option<f64>,
    /// SVM passes over the training documents [default: 40]
    #[arg(long)]
    svm_epochs: Option<usize>,
    /// SVM sampling seed [default: 7]
    #[arg(long)]
    seed: Option<u64>,
    /// Lowercase tokens [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    lowercase: Option<bool>,
}

#[derive(clap::Args)]
struct NnArgs {
    /// Trained checkpoint (required)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Query word (required)
    #[arg(long)]
    word: Option<String>,
    /// Language of the query word [default: x]
    #[arg(long)]
    from: Option<Language>,
    /// Language searched for neighbors [default: y]
    #[arg(long)]
    to: Option<Language>,
    /// Number of neighbors [default: 5]
    #[arg(short, long)]
    k: Option<usize>,
    /// Also write the table to this file [default: stdout only]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExportArgs {
    /// Trained checkpoint (required)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory for embeddings.x.txt and embeddings.y.txt (required)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ProjectArgs {
    /// Trained checkpoint (required)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output file with `token<TAB>lang<TAB>x<TAB>y` lines (required)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Most frequent words taken from each language [default: 100]
    #[arg(long)]
    top: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their cause in the message
            let mut msg = String::new();
            for cause in e.chain() {
                let text = cause.to_string();
                if !msg.contains(&text) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&text);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut s = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Vocab(a) => cmd_vocab(a, &mut s),
        Command::Synth(a) => cmd_synth(a, &mut s),
        Command::Train(a) => cmd_train(a, &mut s),
        Command::Classify(a) => cmd_classify(a, &mut s),
        Command::Nn(a) => cmd_nn(a, &mut s),
        Command::Export(a) => cmd_export(a, &mut s),
        Command::Project(a) => cmd_project(a, &mut s),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_checkpoint(s: &mut Settings, flag: Option<PathBuf>) -> Result<Checkpoint> {
    let path = s.path("model", flag)?;
    Checkpoint::load(&path).context("cannot load checkpoint")
}

fn cmd_vocab(a: VocabArgs, s: &mut Settings) -> Result<()> {
    let input = s.path("input", a.input)?;
    let out = s.path("out", a.out)?;
    let min_count = s.get("min-count", a.min_count, 1)?;
    let max_size = s.optional("max-size", a.max_size)?;
    let lowercase = s.get("lowercase", a.lowercase, false)?;
    s.finish()?;

    let lines = read_token_lines(&input, lowercase)?;
    let vocab = Vocabulary::build(&lines, min_count, max_size)?;
    vocab.save(&out)?;
    println!("{} tokens written to {}", vocab.len(), out.display());
    Ok(())
}

fn cmd_synth(a: SynthArgs, s: &mut Settings) -> Result<()> {
    let d = SynthConfig::default();
    let out = s.path("out", a.out)?;
    let cfg = SynthConfig {
        vocab_size: s.get("vocab-size", a.vocab_size, d.vocab_size)?,
        topics: s.get("topics", a.topics, d.topics)?,
        sentences: s.get("sentences", a.sentences, d.sentences)?,
        documents: s.get("documents", a.documents, d.documents)?,
        zipf_exponent: s.get("zipf-exponent", a.zipf_exponent, d.zipf_exponent)?,
        background: s.get("background", a.background, d.background)?,
        seed: s.get("seed", a.seed, d.seed)?,
        permutation_seed: s.get("permutation-seed", a.permutation_seed, d.permutation_seed)?,
        ..d
    };
    s.finish()?;

    let corpus = generate(&cfg)?;
    create_dir(&out)?;
    corpus.write_to_dir(&out)?;
    s.echo(&out)?;
    println!(
        "wrote {} parallel sentences and {} documents per language to {}",
        cfg.sentences,
        cfg.documents,
        out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs, s: &mut Settings) -> Result<()> {
    let d = TrainConfig::default();
    let source = s.path("source", a.source)?;
    let target = s.path("target", a.target)?;
    let out = s.path("out", a.out)?;
    let vocab_x_path = s.optional_path("vocab-x", a.vocab_x)?;
    let vocab_y_path = s.optional_path("vocab-y", a.vocab_y)?;
    let min_count = s.get("min-count", a.min_count, 1)?;
    let max_vocab = s.optional("max-vocab", a.max_vocab)?;
    let lowercase = s.get("lowercase", a.lowercase, false)?;
    let valid_source = s.optional_path("valid-source", a.valid_source)?;
    let valid_target = s.optional_path("valid-target", a.valid_target)?;
    let seed = s.get("seed", a.seed, 1u64)?;
    let weights = s.get(
        "task-weights",
        a.task_weights,
        List(d.task_weights.0.to_vec()),
    )?;
    let Ok(weights) = <[f64; 4]>::try_from(weights.0) else {
        bail!("--task-weights needs exactly four values");
    };
    let mut cfg = TrainConfig {
        dim: s.get("dim", a.dim, d.dim)?,
        learning_rate: s.get("learning-rate", a.learning_rate, d.learning_rate)?,
        epochs_max: s.get("epochs-max", a.epochs_max, d.epochs_max)?,
        patience: s.get("patience", a.patience, d.patience)?,
        eval_every: s.optional("eval-every", a.eval_every)?,
        activation: s.get("activation", a.activation, d.activation)?,
        init_seed: s.get("init-seed", a.init_seed, seed)?,
        shuffle_seed: s.get("shuffle-seed", a.shuffle_seed, seed)?,
        tree_seed_x: s.get("tree-seed-x", a.tree_seed_x, seed)?,
        tree_seed_y: s.get("tree-seed-y", a.tree_seed_y, seed.wrapping_add(1))?,
        task_weights: TaskWeights(weights),
        ..d
    };
    if valid_source.is_none() {
        let f = s.get("valid-fraction", a.valid_fraction, 0.05)?;
        cfg.validation = Validation::Fraction(f);
    }
    s.finish()?;
    cfg.validate()?;

    let vocab = |given: Option<PathBuf>, corpus: &Path| -> Result<Vocabulary> {
        match given {
            Some(p) => Ok(Vocabulary::load(p)?),
            None => Ok(Vocabulary::build(
                &read_token_lines(corpus, lowercase)?,
                min_count,
                max_vocab,
            )?),
        }
    };
    let vx = vocab(vocab_x_path, &source)?;
    let vy = vocab(vocab_y_path, &target)?;
    let corpus = load_parallel(&source, &target, &vx, &vy, lowercase)?;
    if let (Some(vs), Some(vt)) = (&valid_source, &valid_target) {
        cfg.validation = Validation::Pairs(load_parallel(vs, vt, &vx, &vy, lowercase)?.pairs);
    }

    create_dir(&out)?;
    s.echo(&out)?;
    vx.save(out.join("vocab.x"))?;
    vy.save(out.join("vocab.y"))?;
    let log_path = out.join("train.log");
    if log_path.exists() {
        fs::remove_file(&log_path)
            .with_context(|| format!("cannot replace {}", log_path.display()))?;
    }
    let mut observer =
        FileObserver::new(out.join("checkpoints"), &log_path, vx.clone(), vy.clone())?;
    let (model, report) =
        train_with_observer(&corpus.pairs, (vx.len(), vy.len()), &cfg, &mut observer)?;

    let model_path = out.join("model.bin");
    let tmp = out.join("model.bin.partial");
    Checkpoint::new(model, vx.clone(), vy.clone())?.save(&tmp)?;
    fs::rename(&tmp, &model_path)
        .with_context(|| format!("cannot write {}", model_path.display()))?;

    let opt = |v: Option<f64>| v.map_or("none".to_owned(), |v| v.to_string());
    let summary = format!(
        "vocab_x={}\nvocab_y={}\nlines={}\ndropped_lines={}\ntrain_pairs={}\nvalid_pairs={}\n\
         evaluations={}\ninitial_valid_loss={}\nbest_valid_loss={}\nbest_pairs_seen={}\n\
         final_valid_loss={}\nstopped={}\n",
        vx.len(),
        vy.len(),
        corpus.lines,
        corpus.dropped(),
        report.train_pairs,
        report.valid_pairs,
        report.evaluations.len(),
        opt(report.initial_validation_loss()),
        opt(report.best_validation_loss),
        report
            .best_pairs_seen
            .map_or("none".to_owned(), |v| v.to_string()),
        opt(report.final_validation_loss),
        match report.stopped_reason {
            bilae::trainer::StopReason::Patience => "patience",
            bilae::trainer::StopReason::EpochsMax => "epochs_max",
        },
    );
    write_text(&out.join("report.txt"), &summary)?;
    print!("{summary}");
    println!("model written to {}", model_path.display());
    Ok(())
}

fn cmd_classify(a: ClassifyArgs, s: &mut Settings) -> Result<()> {
    let d = CrossLingualConfig::default();
    let ck = load_checkpoint(s, a.model)?;
    let docs_x = s.path("docs-x", a.docs_x)?;
    let docs_y = s.path("docs-y", a.docs_y)?;
    let out = s.path("out", a.out)?;
    let direction = s.get("direction", a.direction, Direction::XToY)?;
    let mode = s.get("mode", a.mode, "auto".to_owned())?;
    let modes = match mode.as_str() {
        "auto" => WeightMode::ALL.to_vec(),
        m => vec![m.parse::<WeightMode>()?],
    };
    let cfg = CrossLingualConfig {
        c_grid: s.get("c-grid", a.c_grid, List(d.c_grid.clone()))?.0,
        modes,
        train_fraction: s.get("train-fraction", a.train_fraction, d.train_fraction)?,
        valid_fraction: s.get("valid-fraction", a.valid_fraction, d.valid_fraction)?,
        svm: SvmConfig {
            epochs: s.get("svm-epochs", a.svm_epochs, d.svm.epochs)?,
            seed: s.get("seed", a.seed, d.svm.seed)?,
        },
    };
    let lowercase = s.get("lowercase", a.lowercase, false)?;
    s.finish()?;
    if cfg.c_grid.is_empty() || cfg.c_grid.iter().any(|c| c.is_nan() || *c <= 0.0) {
        bail!("--c-grid values must be positive");
    }

    let dx = read_labeled_documents(&docs_x, lowercase)?;
    let dy = read_labeled_documents(&docs_y, lowercase)?;
    let runs: &[Language] = match direction {
        Direction::XToY => &[Language::X],
        Direction::YToX => &[Language::Y],
        Direction::Both => &[Language::X, Language::Y],
    };
    create_dir(&out)?;
    s.echo(&out)?;
    for &src in runs {
        let (train_docs, test_docs) = match src {
            Language::X => (&dx, &dy),
            Language::Y => (&dy, &dx),
        };
        let report = cross_lingual(&ck, src, train_docs, test_docs, &cfg)?;
        let name = format!("report-{}2{}", src, src.other());
        write_text(&out.join(format!("{name}.txt")), &report.render_text())?;
        write_text(&out.join(format!("{name}.kv")), &report.render_kv())?;
        println!(
            "{}: train {} test {} error {:.4} (in-language {:.4}, mode {}, C {})",
            name,
            src,
            src.other(),
            report.target_test.error,
            report.source_test.error,
            report.mode,
            report.c
        );
    }
    Ok(())
}

fn cmd_nn(a: NnArgs, s: &mut Settings) -> Result<()> {
    let ck = load_checkpoint(s, a.model)?;
    let word = s.require("word", a.word)?;
    let from = s.get("from", a.from, Language::X)?;
    let to = s.get("to", a.to, Language::Y)?;
    let k = s.get("k", a.k, 5)?;
    let out = s.optional_path("out", a.out)?;
    s.finish()?;

    let neighbors = nearest_neighbors(&ck, &word, from, to, k)?;
    let mut table = String::from("rank\tword\tsimilarity\n");
    for (i, n) in neighbors.iter().enumerate() {
        table.push_str(&format!("{}\t{}\t{:.6}\n", i + 1, n.word, n.similarity));
    }
    if let Some(path) = out {
        write_text(&path, &table)?;
    }
    std::io::stdout().write_all(table.as_bytes())?;
    Ok(())
}

fn cmd_export(a: ExportArgs, s: &mut Settings) -> Result<()> {
    let ck = load_checkpoint(s, a.model)?;
    let out = s.path("out", a.out)?;
    s.finish()?;
    create_dir(&out)?;
    for lang in [Language::X, Language::Y] {
        let path = out.join(format!("embeddings.{lang}.txt"));
        save_embeddings(&path, ck.vocab(lang), ck.model.embeddings(lang))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_project(a: ProjectArgs, s: &mut Settings) -> Result<()> {
    let ck = load_checkpoint(s, a.model)?;
    let out = s.path("out", a.out)?;
    let top = s.get("top", a.top, 100)?;
    s.finish()?;
    let points = project_2d(&ck, top)?;
    save_projection(&out, &points)?;
    println!("wrote {} points to {}", points.len(), out.display());
    Ok(())
}
