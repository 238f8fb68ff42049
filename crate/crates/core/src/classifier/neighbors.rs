use crate::checkpoint::Checkpoint;
use crate::corpus::Language;
use crate::error::{Error, Result};
use crate::math::{dot, norm};
use crate::model::BilingualModel;

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub word: String,
    pub index: usize,
    pub similarity: f64,
}

/// The `k` target-language words whose embeddings have the highest cosine
/// similarity to `word`'s, best first; equal similarities are ordered by
/// index. Zero vectors have similarity 0 to everything.
pub fn nearest_neighbors(
    checkpoint: &Checkpoint,
    word: &str,
    source: Language,
    target: Language,
    k: usize,
) -> Result<Vec<Neighbor>> {
    let index = checkpoint
        .vocab(source)
        .get(word)
        .ok_or_else(|| Error::UnknownWord(word.to_owned()))?;
    let vocab = checkpoint.vocab(target);
    Ok(
        nearest_by_index(&checkpoint.model, index, source, target, k)?
            .into_iter()
            .map(|(i, similarity)| Neighbor {
                word: vocab.word(i).to_owned(),
                index: i,
                similarity,
            })
            .collect(),
    )
}

pub fn nearest_by_index(
    model: &BilingualModel,
    word: usize,
    source: Language,
    target: Language,
    k: usize,
) -> Result<Vec<(usize, f64)>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let src = model.embeddings(source);
    if word >= src.words() {
        return Err(Error::IndexOutOfRange {
            index: word,
            size: src.words(),
        });
    }
    let query = src.column(word);
    let qn = norm(query);
    let tgt = model.embeddings(target);
    let mut scored: Vec<(usize, f64)> = (0..tgt.words())
        .map(|i| (i, cosine(query, qn, tgt.column(i))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

fn cosine(a: &[f64], a_norm: f64, b: &[f64]) -> f64 {
    let bn = norm(b);
    if a_norm == 0.0 || bn == 0.0 {
        0.0
    } else {
        dot(a, b) / (a_norm * bn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::model::{Activation, ModelConfig};

    fn checkpoint() -> Checkpoint {
        let mut m = BilingualModel::new(&ModelConfig {
            dim: 3,
            vocab_x: 4,
            vocab_y: 5,
            tree_seed_x: 0,
            tree_seed_y: 1,
            init_seed: 2,
            activation: Activation::Tanh,
        })
        .unwrap();
        let y = m.embeddings_mut(Language::Y);
        y.column_mut(1).copy_from_slice(&[0.2, 0.1, -0.3]);
        y.column_mut(3).copy_from_slice(&[0.2, 0.1, -0.3]);
        let v = |p: &str, n: usize| {
            Vocabulary::from_entries((0..n).map(|i| (format!("{p}{i}"), 1)).collect()).unwrap()
        };
        Checkpoint::new(m, v("a", 4), v("b", 5)).unwrap()
    }

    #[test]
    fn same_language_first_neighbor_is_self() {
        let ck = checkpoint();
        for w in ["a0", "a1", "a2", "a3"] {
            let nn = nearest_neighbors(&ck, w, Language::X, Language::X, 1).unwrap();
            assert_eq!(nn[0].word, w);
            assert!((nn[0].similarity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_columns_are_adjacent_lower_index_first() {
        let ck = checkpoint();
        let nn = nearest_neighbors(&ck, "b1", Language::Y, Language::Y, 2).unwrap();
        assert_eq!(nn[0].index, 1);
        assert_eq!(nn[1].index, 3);
        let nn = nearest_neighbors(&ck, "b3", Language::Y, Language::Y, 2).unwrap();
        assert_eq!(nn[0].index, 1);
        assert_eq!(nn[1].index, 3);
    }

    #[test]
    fn unknown_word_is_named() {
        let ck = checkpoint();
        let err = nearest_neighbors(&ck, "nope", Language::X, Language::Y, 3).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn scale_invariant() {
        let mut ck = checkpoint();
        let before = nearest_neighbors(&ck, "a2", Language::X, Language::Y, 5).unwrap();
        for v in ck.model.embeddings_mut(Language::Y).column_mut(4) {
            *v *= 7.5;
        }
        let after = nearest_neighbors(&ck, "a2", Language::X, Language::Y, 5).unwrap();
        let ids = |n: &[Neighbor]| n.iter().map(|x| x.index).collect::<Vec<_>>();
        assert_eq!(ids(&before), ids(&after));
    }

    #[test]
    fn k_larger_than_vocab_is_clipped() {
        let ck = checkpoint();
        let nn = nearest_neighbors(&ck, "a0", Language::X, Language::Y, 50).unwrap();
        assert_eq!(nn.len(), 5);
        assert!(nearest_neighbors(&ck, "a0", Language::X, Language::Y, 0).is_err());
    }
}
