//! Observation and label sequences, change indicators and block counts.
//!
//! Speaker ids are 1-based everywhere in the public interface.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A `T × d` sequence of embeddings, one row per segment.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSequence<S> {
    dim: usize,
    values: Vec<S>,
}

impl<S: Scalar> EmbeddingSequence<S> {
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let dim = match rows.first() {
            Some(r) => r.len(),
            None => return Err(Error::EmptySequence),
        };
        if dim == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be at least 1".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "embedding row",
                    expected: dim,
                    got: row.len(),
                });
            }
            values.extend(row);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embeddings"));
        }
        Ok(EmbeddingSequence { dim, values })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[S] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.values.chunks(self.dim)
    }

    /// Row `t` widened to `f64`.
    pub fn row_f64(&self, t: usize) -> Vec<f64> {
        self.row(t).iter().map(|v| v.wide()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        self.rows().map(<[S]>::to_vec).collect()
    }

    /// Leading `len` rows.
    pub fn prefix(&self, len: usize) -> Self {
        EmbeddingSequence {
            dim: self.dim,
            values: self.values[..len * self.dim].to_vec(),
        }
    }
}

/// Speaker labels in order-of-appearance form: the first label is 1 and each
/// label is at most one more than the maximum before it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelSequence(Vec<usize>);

impl LabelSequence {
    /// Validates an already canonical sequence.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut max = 0;
        for (position, &label) in labels.iter().enumerate() {
            if label == 0 || label > max + 1 {
                return Err(Error::NonCanonicalLabel {
                    position,
                    label,
                    max,
                });
            }
            max = max.max(label);
        }
        Ok(LabelSequence(labels))
    }

    /// Relabels arbitrary ids by order of first appearance.
    pub fn canonicalize<T: Eq + Hash + Clone>(raw: &[T]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut ids: HashMap<T, usize> = HashMap::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = ids.len() + 1;
                *ids.entry(r.clone()).or_insert(next)
            })
            .collect();
        Ok(LabelSequence(labels))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of distinct speakers, `K_T`.
    pub fn num_speakers(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn prefix(&self, len: usize) -> LabelSequence {
        LabelSequence(self.0[..len].to_vec())
    }

    pub fn change_indicators(&self) -> ChangeIndicators {
        ChangeIndicators(self.0.windows(2).map(|w| w[0] != w[1]).collect())
    }

    pub fn block_counts(&self) -> BlockCounts {
        let mut blocks = BlockCounts::first();
        for &label in &self.0[1..] {
            blocks.advance(label).expect("canonical labels");
        }
        blocks
    }
}

/// `z_t` for `t = 2..T`; `true` marks a speaker change.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChangeIndicators(Vec<bool>);

impl ChangeIndicators {
    pub fn new(z: Vec<bool>) -> Self {
        ChangeIndicators(z)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn num_changes(&self) -> usize {
        self.0.iter().filter(|&&z| z).count()
    }

    /// Checks that these indicators are the ones derived from `labels`.
    pub fn check_consistent(&self, labels: &LabelSequence) -> Result<()> {
        if *self != labels.change_indicators() {
            return Err(Error::InconsistentIndicators);
        }
        Ok(())
    }
}

pub fn derive_change_indicators(labels: &LabelSequence) -> ChangeIndicators {
    labels.change_indicators()
}

/// Number of blocks (maximal same-speaker runs) per speaker in a prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockCounts {
    counts: Vec<usize>,
    last: usize,
}

impl BlockCounts {
    /// State after `y_1 = 1`.
    pub fn first() -> Self {
        BlockCounts {
            counts: vec![1],
            last: 1,
        }
    }

    pub fn from_labels(prefix: &LabelSequence) -> Self {
        prefix.block_counts()
    }

    /// `N_k` for 1-based speaker `k`; zero for unseen speakers.
    pub fn count(&self, speaker: usize) -> usize {
        speaker
            .checked_sub(1)
            .and_then(|i| self.counts.get(i))
            .copied()
            .unwrap_or(0)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn last_speaker(&self) -> usize {
        self.last
    }

    pub fn num_speakers(&self) -> usize {
        self.counts.len()
    }

    pub fn total_blocks(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `Σ_{k ≠ last} N_k`, the normaliser mass of existing speakers on a change.
    pub fn switch_mass(&self) -> usize {
        self.total_blocks() - self.counts[self.last - 1]
    }

    /// Extends the prefix by one label in O(1).
    pub fn advance(&mut self, next: usize) -> Result<()> {
        let k = self.counts.len();
        if next == 0 || next > k + 1 {
            return Err(Error::NonCanonicalLabel {
                position: self.total_blocks(),
                label: next,
                max: k,
            });
        }
        if next == k + 1 {
            self.counts.push(1);
        } else if next != self.last {
            self.counts[next - 1] += 1;
        }
        self.last = next;
        Ok(())
    }

    pub fn updated(&self, next: usize) -> Result<Self> {
        let mut out = self.clone();
        out.advance(next)?;
        Ok(out)
    }
}
