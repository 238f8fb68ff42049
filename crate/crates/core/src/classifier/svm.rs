//! One-vs-rest linear SVMs trained by stochastic sub-gradient descent.
//!
//! Each binary problem minimizes `½‖w‖² + C Σ max(0, 1 − y (w·x + b))`,
//! equivalently `λ/2 ‖w‖² + mean hinge` with `λ = 1 / (C n)`. Steps follow
//! the Pegasos schedule `η_t = 1 / (λ t)` with projection onto the ball of
//! radius `1/√λ`; the bias is learned as the weight of a constant feature.
//! The returned weights are the average of the iterates over the second half
//! of training. Features are standardized on the training set and the
//! standardization is folded back into the stored weights.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::embed::DocEmbedding;
use crate::corpus::WeightMode;
use crate::error::{Error, Result};
use crate::math::dot;

pub const DEFAULT_C_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

#[derive(Clone, Debug, PartialEq)]
pub struct SvmConfig {
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            epochs: 40,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSvm {
    /// One weight vector per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c: f64,
    pub mode: Option<WeightMode>,
}

impl LinearSvm {
    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn scores(&self, v: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, v) + b)
            .collect()
    }

    /// Highest-scoring class; the lowest class id wins ties.
    pub fn predict(&self, v: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, s) in self.scores(v).into_iter().enumerate() {
            if s > best_score {
                best = k;
                best_score = s;
            }
        }
        best
    }

    pub fn error_rate(&self, docs: &[DocEmbedding]) -> f64 {
        if docs.is_empty() {
            return 0.0;
        }
        let wrong = docs
            .iter()
            .filter(|d| self.predict(&d.vector) != d.label)
            .count();
        wrong as f64 / docs.len() as f64
    }
}

/// Trains one classifier per `C` in `c_grid` and keeps the one with the
/// lowest error on `valid` (ties go to the smaller `C`).
pub fn train_svm(
    train: &[DocEmbedding],
    valid: &[DocEmbedding],
    c_grid: &[f64],
    config: &SvmConfig,
) -> Result<(LinearSvm, f64)> {
    if c_grid.is_empty() || c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::invalid("C grid must hold positive values"));
    }
    let mut grid = c_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut best: Option<(LinearSvm, f64)> = None;
    for c in grid {
        let svm = train_fixed_c(train, c, config)?;
        let err = if valid.is_empty() {
            svm.error_rate(train)
        } else {
            svm.error_rate(valid)
        };
        if best.as_ref().is_none_or(|(_, e)| err < *e) {
            best = Some((svm, err));
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// Trains the one-vs-rest classifiers for a single `C`.
pub fn train_fixed_c(train: &[DocEmbedding], c: f64, config: &SvmConfig) -> Result<LinearSvm> {
    let Some(first) = train.first() else {
        return Err(Error::invalid("empty training set"));
    };
    let dim = first.vector.len();
    let classes = train.iter().map(|d| d.label).max().unwrap_or(0) + 1;
    let mut present = vec![false; classes];
    for d in train {
        if d.vector.len() != dim {
            return Err(Error::invalid("training vectors differ in dimension"));
        }
        present[d.label] = true;
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(Error::invalid("training set has a single class"));
    }

    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for d in train {
        for (m, v) in mean.iter_mut().zip(&d.vector) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for d in train {
        for ((s, v), m) in scale.iter_mut().zip(&d.vector).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }

    // standardized features with a trailing constant 1 for the bias
    let xs: Vec<Vec<f64>> = train
        .iter()
        .map(|d| {
            d.vector
                .iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((v, m), s)| (v - m) / s)
                .chain(std::iter::once(1.0))
                .collect()
        })
        .collect();

    let lambda = 1.0 / (c * n);
    let mut weights = Vec::with_capacity(classes);
    let mut biases = Vec::with_capacity(classes);
    for k in 0..classes {
        let ys: Vec<f64> = train
            .iter()
            .map(|d| if d.label == k { 1.0 } else { -1.0 })
            .collect();
        let w = pegasos(&xs, &ys, lambda, config, k as u64);
        // fold standardization: w·((x − μ)/σ) + w_b = (w/σ)·x + (w_b − Σ w μ/σ)
        let mut folded = vec![0.0; dim];
        let mut bias = w[dim];
        for j in 0..dim {
            folded[j] = w[j] / scale[j];
            bias -= folded[j] * mean[j];
        }
        weights.push(folded);
        biases.push(bias);
    }
    Ok(LinearSvm {
        weights,
        biases,
        c,
        mode: None,
    })
}

fn pegasos(xs: &[Vec<f64>], ys: &[f64], lambda: f64, config: &SvmConfig, stream: u64) -> Vec<f64> {
    let dim = xs[0].len();
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; dim];
    let mut avg = vec![0.0; dim];
    let mut averaged = 0usize;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut t = 0usize;
    let average_from = config.epochs / 2;
    for epoch in 0..config.epochs {
        order.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64));
        rng.set_stream(stream);
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = ys[i] * dot(&w, &xs[i]);
            let shrink = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                    *wj += eta * ys[i] * xj;
                }
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                for wj in w.iter_mut() {
                    *wj *= s;
                }
            }
            if epoch >= average_from {
                averaged += 1;
                let a = 1.0 / averaged as f64;
                for (aj, wj) in avg.iter_mut().zip(&w) {
                    *aj += (wj - *aj) * a;
                }
            }
        }
    }
    if averaged == 0 {
        w
    } else {
        avg
    }
}

/// Error rate and confusion matrix of a classifier on a test set.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub error: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn precision(&self, class: usize) -> Option<f64> {
        let predicted: usize = self.confusion.iter().map(|row| row[class]).sum();
        (predicted > 0).then(|| self.confusion[class][class] as f64 / predicted as f64)
    }

    pub fn recall(&self, class: usize) -> Option<f64> {
        let actual: usize = self.confusion[class].iter().sum();
        (actual > 0).then(|| self.confusion[class][class] as f64 / actual as f64)
    }

    /// Human-readable report; `names` labels the classes.
    pub fn render_text(&self, names: &[String]) -> String {
        let name = |k: usize| names.get(k).map(String::as_str).unwrap_or("?").to_owned();
        let fmt = |v: Option<f64>| v.map_or("n/a".to_owned(), |v| format!("{v:.4}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "error rate: {:.4} ({} documents)",
            self.error,
            self.total()
        );
        let _ = writeln!(s, "{:<12} {:>9} {:>9}", "class", "precision", "recall");
        for k in 0..self.confusion.len() {
            let _ = writeln!(
                s,
                "{:<12} {:>9} {:>9}",
                name(k),
                fmt(self.precision(k)),
                fmt(self.recall(k))
            );
        }
        let _ = writeln!(s, "confusion (rows = true, columns = predicted):");
        let _ = write!(s, "{:<12}", "");
        for k in 0..self.confusion.len() {
            let _ = write!(s, " {:>8}", name(k));
        }
        let _ = writeln!(s);
        for (k, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "{:<12}", name(k));
            for v in row {
                let _ = write!(s, " {v:>8}");
            }
            let _ = writeln!(s);
        }
        s
    }

    /// `key=value` lines.
    pub fn render_kv(&self, names: &[String]) -> String {
        let name = |k: usize| names.get(k).cloned().unwrap_or_else(|| k.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "error={}", self.error);
        let _ = writeln!(s, "documents={}", self.total());
        for k in 0..self.confusion.len() {
            if let Some(p) = self.precision(k) {
                let _ = writeln!(s, "precision.{}={p}", name(k));
            }
            if let Some(r) = self.recall(k) {
                let _ = writeln!(s, "recall.{}={r}", name(k));
            }
            for (j, v) in self.confusion[k].iter().enumerate() {
                let _ = writeln!(s, "confusion.{}.{}={v}", name(k), name(j));
            }
        }
        s
    }
}

pub fn evaluate(svm: &LinearSvm, test: &[DocEmbedding]) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let classes = test
        .iter()
        .map(|d| d.label + 1)
        .max()
        .unwrap_or(0)
        .max(svm.classes());
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut wrong = 0usize;
    for d in test {
        let p = svm.predict(&d.vector);
        confusion[d.label][p] += 1;
        if p != d.label {
            wrong += 1;
        }
    }
    Ok(Evaluation {
        error: wrong as f64 / test.len() as f64,
        confusion,
    })
}
