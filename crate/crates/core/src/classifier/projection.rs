//! Two-dimensional PCA view of the most frequent words of both languages.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::checkpoint::Checkpoint;
use crate::corpus::Language;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedWord {
    pub word: String,
    pub language: Language,
    pub x: f64,
    pub y: f64,
}

/// Projects the `top_n` most frequent words of each language onto the two
/// leading principal directions of their stacked, mean-centered embeddings.
pub fn project_2d(checkpoint: &Checkpoint, top_n: usize) -> Result<Vec<ProjectedWord>> {
    if top_n < 2 {
        return Err(Error::invalid("top_n must be at least 2"));
    }
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for lang in [Language::X, Language::Y] {
        let vocab = checkpoint.vocab(lang);
        let embed = checkpoint.model.embeddings(lang);
        // vocabulary indices are in descending frequency order
        for i in 0..top_n.min(vocab.len()) {
            labels.push((vocab.word(i).to_owned(), lang));
            rows.push(embed.column(i).to_vec());
        }
    }
    let coords = principal_projection(&rows, 2);
    Ok(labels
        .into_iter()
        .zip(coords)
        .map(|((word, language), c)| ProjectedWord {
            word,
            language,
            x: c[0],
            y: c[1],
        })
        .collect())
}

/// Coordinates of mean-centered `rows` along the `k` leading eigenvectors of
/// their covariance. Each direction's largest-magnitude entry is made
/// positive; directions beyond the data dimension give zeros.
pub fn principal_projection(rows: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let d = rows[0].len();
    let mut data = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    for j in 0..d {
        let mean = data.column(j).mean();
        data.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = data.transpose() * &data / n as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut out = vec![vec![0.0; k]; n];
    for (slot, &e) in order.iter().take(k).enumerate() {
        let mut dir = eig.eigenvectors.column(e).into_owned();
        let lead = dir.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| {
            if v.abs() > acc.1.abs() {
                (i, *v)
            } else {
                acc
            }
        });
        if lead.1 < 0.0 {
            dir.neg_mut();
        }
        let proj = &data * dir;
        for i in 0..n {
            out[i][slot] = proj[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_project_to_origin() {
        let rows = vec![vec![0.3, -1.0, 2.0]; 6];
        for p in principal_projection(&rows, 2) {
            assert!(p[0].abs() < 1e-12 && p[1].abs() < 1e-12);
        }
    }

    #[test]
    fn points_on_a_line_have_no_second_coordinate() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64 - 4.0;
                vec![1.0 + 2.0 * t, -3.0 + 0.5 * t, t]
            })
            .collect();
        let p = principal_projection(&rows, 2);
        for (i, c) in p.iter().enumerate() {
            assert!(c[1].abs() < 1e-9, "point {i}: {c:?}");
        }
        // sign convention: first direction's largest entry is the x-axis one, positive
        assert!(p[9][0] > p[0][0]);
    }

    #[test]
    fn one_dimensional_embeddings() {
        let rows = vec![vec![1.0], vec![2.0], vec![4.0]];
        let p = principal_projection(&rows, 2);
        assert!(p.iter().all(|c| c[1] == 0.0));
    }
}
