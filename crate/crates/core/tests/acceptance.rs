//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL ...` line
//! straight to stdout (visible without `--nocapture`) and then asserts.

#![allow(clippy::needless_range_loop)]

use std::io::Write;
use std::sync::OnceLock;

use bilae::checkpoint::Checkpoint;
use bilae::classifier::{cross_lingual, nearest_by_index, CrossLingualConfig, CrossLingualReport};
use bilae::corpus::{
    tfidf, to_bag, BagOfWords, Language, RawDocument, SentencePair, Vocabulary, WeightMode,
};
use bilae::model::{Activation, BilingualModel, ModelConfig};
use bilae::synth::{generate, SynthConfig, SynthCorpus};
use bilae::trainer::{train, TrainConfig, TrainReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: usize, ok: bool, detail: String) {
    let line = format!(
        "criterion {n}: {} {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn random_model(seed: u64, dim: usize, vx: usize, vy: usize, scale: f64) -> BilingualModel {
    let mut m = BilingualModel::new(&ModelConfig {
        dim,
        vocab_x: vx,
        vocab_y: vy,
        tree_seed_x: seed.wrapping_add(11),
        tree_seed_y: seed.wrapping_add(12),
        init_seed: seed,
        activation: Activation::Tanh,
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDEAD_BEEF);
    for block in m.blocks_mut() {
        for v in block.iter_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
    m
}

fn random_bag(rng: &mut ChaCha8Rng, v: usize, max_len: usize) -> BagOfWords {
    let len = rng.random_range(0..=max_len);
    BagOfWords::new((0..len).map(|_| rng.random_range(0..v)).collect())
}

#[test]
fn criterion_1_tree_softmax_normalization() {
    let mut worst = 0.0f64;
    for v in [1usize, 2, 3, 5, 8, 100, 1024] {
        for state in 0..20u64 {
            let m = random_model(state * 7919 + v as u64, 4, v, 2, 2.0);
            let mut rng = ChaCha8Rng::seed_from_u64(state);
            let h: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let total: f64 = (0..v)
                .map(|w| m.word_log_prob(w, &h, Language::X).exp())
                .sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    let ok = worst <= 1e-6;
    report(1, ok, format!("max |sum - 1| = {worst:.3e} (tol 1e-6)"));
    assert!(ok);
}

#[test]
fn criterion_2_gradients_match_finite_differences() {
    const STEP: f64 = 1e-5;
    let mut worst = 0.0f64;
    let instances = 24;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let vx = rng.random_range(1..=8);
        let vy = rng.random_range(1..=8);
        let d = rng.random_range(1..=5);
        let m = random_model(seed, d, vx, vy, 0.7);
        let pair = SentencePair::new(random_bag(&mut rng, vx, 7), random_bag(&mut rng, vy, 7));
        let analytic = m.pair_gradients(&pair).dense_blocks(&m);
        let mut probe = m.clone();
        for (b, grad) in analytic.iter().enumerate() {
            for i in 0..grad.len() {
                let orig = probe.blocks()[b][i];
                probe.blocks_mut()[b][i] = orig + STEP;
                let up = probe.pair_loss(&pair).total;
                probe.blocks_mut()[b][i] = orig - STEP;
                let down = probe.pair_loss(&pair).total;
                probe.blocks_mut()[b][i] = orig;
                let numeric = (up - down) / (2.0 * STEP);
                let rel = (grad[i] - numeric).abs() / (grad[i].abs() + numeric.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
    }
    let ok = worst < 1e-4;
    report(
        2,
        ok,
        format!("{instances} instances, max relative error = {worst:.3e} (tol 1e-4)"),
    );
    assert!(ok);
}

#[test]
fn criterion_3_zero_decoder_loss_law() {
    let mut worst = 0.0f64;
    let mut bags = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (k, v) in [2usize, 4, 7, 16].into_iter().enumerate() {
        let mut m = random_model(k as u64, 3, 5, v, 1.5);
        m.decoder_mut(Language::Y).bias_mut().fill(0.0);
        m.decoder_mut(Language::Y).weights_mut().fill(0.0);
        let count = if k < 2 { 13 } else { 12 };
        for _ in 0..count {
            let src = random_bag(&mut rng, 5, 6);
            let tgt = random_bag(&mut rng, v, 12);
            let enc = m.encode(&src, Language::X).unwrap();
            let depths: usize = tgt
                .indices()
                .iter()
                .map(|&w| m.tree(Language::Y).depth(w))
                .sum();
            let expect = depths as f64 * std::f64::consts::LN_2;
            worst = worst.max((m.recon_loss(&tgt, Language::Y, &enc) - expect).abs());
            bags += 1;
        }
    }
    let ok = worst <= 1e-12 && bags == 50;
    report(
        3,
        ok,
        format!("{bags} bags, max deviation = {worst:.3e} (tol 1e-12)"),
    );
    assert!(ok);
}

/// The criterion 4 setup, computed once and shared with 5 and 6.
struct Synthetic {
    corpus: SynthCorpus,
    trained: Checkpoint,
    control: Checkpoint,
    report: TrainReport,
}

fn synthetic_train_config() -> TrainConfig {
    TrainConfig {
        dim: 16,
        ..TrainConfig::default()
    }
}

fn synthetic() -> &'static Synthetic {
    static CELL: OnceLock<Synthetic> = OnceLock::new();
    CELL.get_or_init(|| {
        let corpus = generate(&SynthConfig::default()).unwrap();
        let vx = Vocabulary::build(&corpus.parallel_x, 1, None).unwrap();
        let vy = Vocabulary::build(&corpus.parallel_y, 1, None).unwrap();
        let pairs: Vec<SentencePair> = corpus
            .parallel_x
            .iter()
            .zip(&corpus.parallel_y)
            .map(|(x, y)| SentencePair::new(to_bag(x, &vx), to_bag(y, &vy)))
            .collect();
        let cfg = synthetic_train_config();
        let (model, report) = train(&pairs, (vx.len(), vy.len()), &cfg).unwrap();
        let control_model = BilingualModel::new(&cfg.model_config(vx.len(), vy.len())).unwrap();
        Synthetic {
            trained: Checkpoint::new(model, vx.clone(), vy.clone()).unwrap(),
            control: Checkpoint::new(control_model, vx, vy).unwrap(),
            corpus,
            report,
        }
    })
}

fn raw_docs(docs: &[(String, Vec<String>)]) -> Vec<RawDocument> {
    docs.iter()
        .map(|(label, tokens)| RawDocument {
            label: label.clone(),
            tokens: tokens.clone(),
        })
        .collect()
}

fn transfer(ck: &Checkpoint) -> CrossLingualReport {
    let s = synthetic();
    cross_lingual(
        ck,
        Language::X,
        &raw_docs(&s.corpus.documents_x),
        &raw_docs(&s.corpus.documents_y),
        &CrossLingualConfig::default(),
    )
    .unwrap()
}

#[test]
fn criterion_4_synthetic_cross_lingual_transfer() {
    let s = synthetic();
    let trained = transfer(&s.trained);
    let control = transfer(&s.control);
    let err = trained.target_test.error;
    let ctl = control.target_test.error;
    let ok = err <= 0.15 && ctl >= 0.60;
    report(
        4,
        ok,
        format!(
            "X->Y test error = {:.2}% (max 15%), random-embedding control = {:.2}% (min 60%)",
            100.0 * err,
            100.0 * ctl
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_5_translation_recovery() {
    let s = synthetic();
    let vx = s.trained.vocab(Language::X);
    let vy = s.trained.vocab(Language::Y);
    // the vocabulary is sorted by descending frequency
    let top = 30.min(vx.len());
    let mut hits = 0;
    for i in 0..top {
        let nn = nearest_by_index(&s.trained.model, i, Language::X, Language::Y, 1).unwrap();
        let truth = s.corpus.translate(vx.word(i)).unwrap();
        if vy.word(nn[0].0) == truth {
            hits += 1;
        }
    }
    let ok = hits * 5 >= top * 4;
    report(
        5,
        ok,
        format!("{hits}/{top} top-1 translations recovered (min 80%)"),
    );
    assert!(ok);
}

#[test]
fn criterion_6_trainer_effectiveness_and_early_stopping() {
    let s = synthetic();
    let initial = s.report.initial_validation_loss().unwrap();
    let best = s.report.best_validation_loss.unwrap();
    let last = s.report.final_validation_loss.unwrap();
    let cfg = synthetic_train_config();
    let n = s.corpus.parallel_x.len();
    let valid_start = n - (n as f64 * 0.05).ceil() as usize;
    let valid: Vec<SentencePair> = s.corpus.parallel_x[valid_start..]
        .iter()
        .zip(&s.corpus.parallel_y[valid_start..])
        .map(|(x, y)| {
            SentencePair::new(
                to_bag(x, s.trained.vocab(Language::X)),
                to_bag(y, s.trained.vocab(Language::Y)),
            )
        })
        .collect();
    let returned =
        bilae::trainer::validation_loss(&s.trained.model, &valid, &cfg.task_weights).unwrap();
    let ok = best < 0.5 * initial && returned <= last && (returned - best).abs() < 1e-9;
    report(
        6,
        ok,
        format!(
            "initial {initial:.4}, best {best:.4} (ratio {:.3}, max 0.5), returned {returned:.4} <= final {last:.4}",
            best / initial
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_determinism_and_round_trip() {
    let corpus = generate(&SynthConfig {
        sentences: 300,
        ..SynthConfig::default()
    })
    .unwrap();
    let vx = Vocabulary::build(&corpus.parallel_x, 1, None).unwrap();
    let vy = Vocabulary::build(&corpus.parallel_y, 1, None).unwrap();
    let pairs: Vec<SentencePair> = corpus
        .parallel_x
        .iter()
        .zip(&corpus.parallel_y)
        .map(|(x, y)| SentencePair::new(to_bag(x, &vx), to_bag(y, &vy)))
        .collect();
    let cfg = TrainConfig {
        dim: 8,
        epochs_max: 3,
        ..TrainConfig::default()
    };
    let bytes = || {
        let (m, _) = train(&pairs, (vx.len(), vy.len()), &cfg).unwrap();
        let mut buf = Vec::new();
        Checkpoint::new(m, vx.clone(), vy.clone())
            .unwrap()
            .write(&mut buf)
            .unwrap();
        buf
    };
    let a = bytes();
    let b = bytes();
    let identical = a == b;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    let ck = Checkpoint::read(&mut a.as_slice()).unwrap();
    ck.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    let on_disk = std::fs::read(&path).unwrap();
    let exact = loaded == ck
        && on_disk == a
        && loaded
            .model
            .blocks()
            .iter()
            .zip(ck.model.blocks())
            .all(|(x, y)| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));

    let ok = identical && exact;
    report(
        7,
        ok,
        format!("repeat runs identical: {identical}, save/load bit-exact: {exact}"),
    );
    assert!(ok);
}

#[test]
fn criterion_8_tfidf_oracle() {
    let words = ["alpha", "beta", "gamma", "delta", "eps"];
    let docs: Vec<Vec<&str>> = vec![
        vec!["alpha", "beta", "beta", "gamma"],
        vec!["alpha", "alpha", "delta"],
        vec!["beta", "eps", "eps", "eps", "gamma", "oov"],
        vec!["alpha", "beta", "gamma", "delta", "eps"],
        vec!["delta", "delta", "gamma"],
    ];
    let vocab =
        Vocabulary::from_entries(words.iter().map(|w| (w.to_string(), 1)).collect()).unwrap();
    let raw: Vec<(Vec<&str>, usize)> = docs.iter().cloned().map(|d| (d, 0)).collect();
    let set = tfidf(&raw, &vocab, WeightMode::Tfidf, Language::X);

    // tf * ln(N / df), then divided by the document's total
    let n = docs.len() as f64;
    let mut worst = 0.0f64;
    let mut worst_sum = 0.0f64;
    for (doc, tokens) in set.documents.iter().zip(&docs) {
        let raw: Vec<f64> = words
            .iter()
            .map(|w| {
                let tf = tokens.iter().filter(|t| *t == w).count() as f64;
                let df = docs.iter().filter(|d| d.contains(w)).count() as f64;
                if tf > 0.0 {
                    tf * (n / df).ln()
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let mut dense = [0.0; 5];
        for &(i, x) in &doc.weights {
            dense[i] = x;
        }
        for (i, r) in raw.iter().enumerate() {
            let expect = if total > 0.0 { r / total } else { 0.0 };
            worst = worst.max((dense[i] - expect).abs());
        }
        if !doc.degenerate {
            worst_sum = worst_sum.max((dense.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let ok = worst <= 1e-12 && worst_sum <= 1e-12;
    report(
        8,
        ok,
        format!("max weight deviation = {worst:.3e}, max |sum - 1| = {worst_sum:.3e} (tol 1e-12)"),
    );
    assert!(ok);
}

#[test]
fn criterion_9_decoder_rows_touched() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for i in 0..100u64 {
        let v = rng.random_range(1..=2000);
        let m = random_model(i, 2, 3, v, 0.5);
        let enc = m.encode(&BagOfWords::new(vec![0, 1]), Language::X).unwrap();
        let bag = random_bag(&mut rng, v, 40);
        let (_, rows) = m.recon_loss_traced(&bag, Language::Y, &enc);
        let bound = bag.len() * (v as f64).log2().ceil() as usize;
        if rows > bound {
            violations += 1;
        }
        if bound > 0 {
            max_ratio = max_ratio.max(rows as f64 / bound as f64);
        }
    }
    let ok = violations == 0;
    report(
        9,
        ok,
        format!("100 bags, {violations} over bound, max rows/bound = {max_ratio:.3}"),
    );
    assert!(ok);
}
