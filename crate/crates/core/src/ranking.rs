use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{Error, Result};

/// Total order used for every score-sorted list: score descending, then item id ascending.
pub fn by_score_then_id(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// An ordered list of `(item, score)` entries. Position `p` (1-based) holds `entries[p - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    entries: Vec<(usize, f64)>,
}

impl RankedList {
    /// Build a list in the given order. Duplicate items are rejected.
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for &(item, _) in &entries {
            if !seen.insert(item) {
                return Err(Error::invalid(format!("duplicate item {item} in ranked list")));
            }
        }
        Ok(Self { entries })
    }

    /// Build a list by sorting entries with [`by_score_then_id`].
    pub fn from_scores(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by(by_score_then_id);
        Self::new(entries)
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(Self::new(entries.clone()).is_ok());
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn items(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    pub fn scores(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, s)| s)
    }

    /// 1-based position of `item`, if present.
    pub fn position_of(&self, item: usize) -> Option<usize> {
        self.entries.iter().position(|&(i, _)| i == item).map(|p| p + 1)
    }

    /// The first `k` entries (or all of them when shorter).
    pub fn truncated(&self, k: usize) -> RankedList {
        RankedList {
            entries: self.entries.iter().take(k).copied().collect(),
        }
    }
}
