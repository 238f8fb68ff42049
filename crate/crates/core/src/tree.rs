//! Binary code tree used by the decoder.
//!
//! The tree is the complete ("heap-shaped") binary tree with `V` leaves. In
//! heap numbering its `2V − 1` nodes are `0..2V−1`, node `i` having children
//! `2i + 1` (left, bit 0) and `2i + 2` (right, bit 1). Nodes `0..V−1` are
//! internal and numbered breadth-first from the root; nodes `V−1..2V−1` are
//! leaves. Words are assigned to leaves by a seeded permutation, so a tree is
//! fully determined by `(V, seed)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Root-to-leaf path of one word: internal node ids and branch bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub bits: Vec<u8>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn steps(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.nodes.iter().copied().zip(self.bits.iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeTree {
    vocab_size: usize,
    seed: u64,
    paths: Vec<Path>,
}

impl CodeTree {
    /// Builds the complete tree over `vocab_size` leaves and places words on
    /// leaves by a uniform random permutation drawn from `ChaCha8Rng(seed)`.
    pub fn random(vocab_size: usize, seed: u64) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::invalid("code tree needs at least one word"));
        }
        let mut leaf_of_word: Vec<usize> = (0..vocab_size).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        leaf_of_word.shuffle(&mut rng);

        let first_leaf = vocab_size - 1;
        let paths = leaf_of_word
            .iter()
            .map(|&leaf| {
                let mut node = first_leaf + leaf;
                let mut nodes = Vec::new();
                let mut bits = Vec::new();
                while node > 0 {
                    let parent = (node - 1) / 2;
                    bits.push(if node == 2 * parent + 2 { 1 } else { 0 });
                    nodes.push(parent);
                    node = parent;
                }
                nodes.reverse();
                bits.reverse();
                Path { nodes, bits }
            })
            .collect();

        Ok(CodeTree {
            vocab_size,
            seed,
            paths,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn internal_count(&self) -> usize {
        self.vocab_size - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self, word: usize) -> Result<&Path> {
        self.paths.get(word).ok_or(Error::IndexOutOfRange {
            index: word,
            size: self.vocab_size,
        })
    }

    /// Unchecked variant of [`CodeTree::path`] for hot loops.
    #[inline]
    pub(crate) fn path_of(&self, word: usize) -> &Path {
        &self.paths[word]
    }

    pub fn depth(&self, word: usize) -> usize {
        self.paths[word].len()
    }

    pub fn max_depth(&self) -> usize {
        self.paths.iter().map(Path::len).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_word_has_empty_path() {
        let t = CodeTree::random(1, 3).unwrap();
        assert_eq!(t.internal_count(), 0);
        assert!(t.path(0).unwrap().is_empty());
    }

    #[test]
    fn zero_words_is_an_error() {
        assert!(CodeTree::random(0, 0).is_err());
    }

    #[test]
    fn two_words_are_siblings() {
        let t = CodeTree::random(2, 9).unwrap();
        let a = t.path(0).unwrap();
        let b = t.path(1).unwrap();
        assert_eq!(a.nodes, vec![0]);
        assert_eq!(b.nodes, vec![0]);
        let mut bits = vec![a.bits[0], b.bits[0]];
        bits.sort();
        assert_eq!(bits, vec![0, 1]);
    }

    // Leaf depths of the complete tree with v leaves, enumerated by walking
    // the level sizes rather than the heap arithmetic used above.
    fn complete_tree_leaf_depths(v: usize) -> Vec<usize> {
        let mut depths = Vec::new();
        let mut level = 0;
        let mut width = 1usize;
        let mut nodes_left = 2 * v - 1;
        let mut internals_left = v - 1;
        while nodes_left > 0 {
            let here = width.min(nodes_left);
            let internal_here = here.min(internals_left);
            for _ in internal_here..here {
                depths.push(level);
            }
            internals_left -= internal_here;
            nodes_left -= here;
            width = 2 * internal_here;
            level += 1;
        }
        depths.sort();
        depths
    }

    #[test]
    fn five_words_depths() {
        let t = CodeTree::random(5, 1234).unwrap();
        let mut depths: Vec<usize> = (0..5).map(|w| t.depth(w)).collect();
        depths.sort();
        assert_eq!(depths, vec![2, 2, 2, 3, 3]);
        assert_eq!(depths, complete_tree_leaf_depths(5));
        let kraft: usize = depths.iter().map(|d| 1usize << (3 - d)).sum();
        assert_eq!(kraft, 8);
    }

    #[test]
    fn eight_words_use_every_three_bit_code() {
        let t = CodeTree::random(8, 77).unwrap();
        let mut codes: Vec<Vec<u8>> = (0..8).map(|w| t.path(w).unwrap().bits.clone()).collect();
        assert!(codes.iter().all(|c| c.len() == 3));
        codes.sort();
        let all: Vec<Vec<u8>> = (0..8u8)
            .map(|i| vec![(i >> 2) & 1, (i >> 1) & 1, i & 1])
            .collect();
        assert_eq!(codes, all);
    }

    #[test]
    fn out_of_range_word() {
        let t = CodeTree::random(4, 0).unwrap();
        assert!(matches!(
            t.path(4),
            Err(Error::IndexOutOfRange { index: 4, size: 4 })
        ));
    }

    #[test]
    fn depths_match_enumeration_for_many_sizes() {
        for v in 1..=300 {
            let t = CodeTree::random(v, v as u64).unwrap();
            let mut depths: Vec<usize> = (0..v).map(|w| t.depth(w)).collect();
            depths.sort();
            assert_eq!(depths, complete_tree_leaf_depths(v), "V={v}");
        }
    }

    #[test]
    fn seed_changes_assignment() {
        let a = CodeTree::random(64, 1).unwrap();
        let b = CodeTree::random(64, 2).unwrap();
        let c = CodeTree::random(64, 1).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
