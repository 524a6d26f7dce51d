//! Canonical indexing for unordered pairs of arms.
//!
//! Every module that talks about pairs uses the same convention: a pair is
//! `(i, j)` with `i < j`, and pairs are laid out lexicographically, so for
//! `k` arms the pair `(i, j)` lives at offset
//! `i*k - i*(i+1)/2 + (j - i - 1)` in a flat slice of length `k*(k-1)/2`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Set of canonical pairs; ordered so iteration is deterministic.
pub type PairSet = BTreeSet<(usize, usize)>;

/// Number of unordered pairs among `k` arms.
pub fn pair_count(k: usize) -> usize {
    k * (k.saturating_sub(1)) / 2
}

/// Flat offset of canonical pair `(i, j)`, `i < j < k`.
pub fn pair_index(k: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * k - i * (i + 1) / 2 + (j - i - 1)
}

/// Iterate canonical pairs in index order.
pub fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

/// A value per canonical pair, indexed by [`pair_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairVec {
    k: usize,
    values: Vec<f64>,
}

impl PairVec {
    pub fn zeros(k: usize) -> Self {
        PairVec {
            k,
            values: vec![0.0; pair_count(k)],
        }
    }

    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut v = PairVec::zeros(k);
        for (i, j) in pairs(k) {
            v.set(i, j, f(i, j));
        }
        v
    }

    /// Wraps an existing flat slice; errors when the length is not `C(k,2)`.
    pub fn from_values(k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != pair_count(k) {
            return Err(Error::DimensionMismatch {
                expected: pair_count(k),
                got: values.len(),
            });
        }
        Ok(PairVec { k, values })
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[pair_index(self.k, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let idx = pair_index(self.k, i, j);
        self.values[idx] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Pairs together with their values, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        pairs(self.k).zip(self.values.iter().copied())
    }
}
