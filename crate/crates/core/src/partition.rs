//! Cluster assignments.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Cluster label per sample. Labels are arbitrary; `canonical` renumbers
/// clusters in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn single_cluster(n: usize) -> Self {
        Self::new(vec![0; n])
    }

    pub fn singletons(n: usize) -> Self {
        Self::new((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Relabels clusters 0, 1, … in order of first appearance.
    pub fn canonical(&self) -> Partition {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| match map.iter().find(|(old, _)| *old == l) {
                Some(&(_, new)) => new,
                None => {
                    let new = map.len();
                    map.push((l, new));
                    new
                }
            })
            .collect();
        Partition { labels }
    }

    /// Member lists in canonical cluster order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let canon = self.canonical();
        let k = canon.labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); k];
        for (i, &l) in canon.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters().iter().map(Vec::len).collect()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters().len()
    }

    #[inline]
    pub fn together(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: self.labels.len(),
            });
        }
        Ok(())
    }
}

impl From<Vec<usize>> for Partition {
    fn from(labels: Vec<usize>) -> Self {
        Self::new(labels)
    }
}

/// Every set partition of `n` items, as canonical restricted-growth labelings.
pub fn all_set_partitions(n: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut labels = vec![0usize; n];
    loop {
        out.push(Partition::new(labels.clone()));
        // advance the restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return out;
            }
            let max_prefix = labels[..i].iter().copied().max().unwrap_or(0);
            if labels[i] <= max_prefix {
                labels[i] += 1;
                for l in labels.iter_mut().skip(i + 1) {
                    *l = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}
