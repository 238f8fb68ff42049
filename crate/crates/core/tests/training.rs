use bilae::checkpoint::Checkpoint;
use bilae::corpus::{to_bag, BagOfWords, SentencePair, Vocabulary};
use bilae::model::TaskWeights;
use bilae::synth::{generate, SynthConfig};
use bilae::trainer::{train, train_with_observer, FileObserver, StopReason, TrainConfig};

fn small_corpus(sentences: usize) -> (Vec<SentencePair>, Vocabulary, Vocabulary) {
    let c = generate(&SynthConfig {
        sentences,
        vocab_size: 24,
        ..SynthConfig::default()
    })
    .unwrap();
    let vx = Vocabulary::build(&c.parallel_x, 1, None).unwrap();
    let vy = Vocabulary::build(&c.parallel_y, 1, None).unwrap();
    let pairs = c
        .parallel_x
        .iter()
        .zip(&c.parallel_y)
        .map(|(x, y)| SentencePair::new(to_bag(x, &vx), to_bag(y, &vy)))
        .collect();
    (pairs, vx, vy)
}

#[test]
fn x_embedding_gradients_ignore_y_bags_without_y_targets() {
    let (pairs, vx, vy) = small_corpus(120);
    let weights = TaskWeights([1.0, 1.0, 0.0, 0.0]);
    let cfg = TrainConfig {
        dim: 6,
        epochs_max: 1,
        ..TrainConfig::default()
    };
    // a partly trained model so that decoders are not zero
    let (model, _) = train(&pairs, (vx.len(), vy.len()), &cfg).unwrap();
    for (i, p) in pairs.iter().enumerate() {
        let garbage: Vec<usize> = (0..p.target.len())
            .map(|k| (i * 5 + k * 3) % vy.len())
            .collect();
        let swapped = SentencePair::new(p.source.clone(), BagOfWords::new(garbage));
        let (_, g) = model.pair_gradients_weighted(p, &weights);
        let (_, h) = model.pair_gradients_weighted(&swapped, &weights);
        assert_eq!(g.embed_x, h.embed_x, "pair {i}");
    }
}

#[test]
fn identical_runs_are_bit_identical() {
    let (pairs, vx, vy) = small_corpus(150);
    let cfg = TrainConfig {
        dim: 5,
        epochs_max: 3,
        ..TrainConfig::default()
    };
    let (a, ra) = train(&pairs, (vx.len(), vy.len()), &cfg).unwrap();
    let (b, rb) = train(&pairs, (vx.len(), vy.len()), &cfg).unwrap();
    let lines = |r: &bilae::trainer::TrainReport| -> Vec<String> {
        r.evaluations.iter().map(|e| e.log_line()).collect()
    };
    assert_eq!(lines(&ra), lines(&rb));
    for (x, y) in a.blocks().iter().zip(b.blocks()) {
        assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
    let (c, _) = train(
        &pairs,
        (vx.len(), vy.len()),
        &TrainConfig {
            shuffle_seed: 2,
            ..cfg
        },
    )
    .unwrap();
    assert_ne!(a, c);
}

#[test]
fn patience_stops_training_on_an_overshooting_rate() {
    let (pairs, vx, vy) = small_corpus(100);
    let cfg = TrainConfig {
        dim: 4,
        learning_rate: 0.5,
        epochs_max: 200,
        patience: 2,
        eval_every: Some(20),
        ..TrainConfig::default()
    };
    let (_, report) = train(&pairs, (vx.len(), vy.len()), &cfg).unwrap();
    assert_eq!(report.stopped_reason, StopReason::Patience);
    let best = report.best_validation_loss.unwrap();
    assert!(report.evaluations.iter().all(|e| e.valid_loss >= best));
    assert!(best <= report.final_validation_loss.unwrap());
}

#[test]
fn file_observer_writes_log_and_improving_checkpoints() {
    let (pairs, vx, vy) = small_corpus(80);
    let dir = tempfile::tempdir().unwrap();
    let mut obs = FileObserver::new(
        dir.path().join("ckpt"),
        dir.path().join("train.log"),
        vx.clone(),
        vy.clone(),
    )
    .unwrap();
    let cfg = TrainConfig {
        dim: 4,
        epochs_max: 3,
        ..TrainConfig::default()
    };
    let (model, report) =
        train_with_observer(&pairs, (vx.len(), vy.len()), &cfg, &mut obs).unwrap();
    let log = std::fs::read_to_string(dir.path().join("train.log")).unwrap();
    assert_eq!(log.lines().count(), report.evaluations.len());
    assert!(log.lines().all(|l| l.split('\t').count() == 7));
    let last = obs.written.last().unwrap();
    assert!(last.to_string_lossy().ends_with(&format!(
        "checkpoint-{:010}.bin",
        report.best_pairs_seen.unwrap()
    )));
    assert_eq!(Checkpoint::load(last).unwrap().model, model);
}
