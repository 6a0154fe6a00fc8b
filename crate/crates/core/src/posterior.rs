//! Posterior summaries that do not depend on cluster labels.

use alloc::vec;
use alloc::vec::Vec;
use core::borrow::Borrow;

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::sampler::Draw;

/// Pairwise co-clustering frequencies `ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoClusteringMatrix {
    n: usize,
    n_draws: usize,
    zeta: Vec<f64>,
}

impl CoClusteringMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.zeta[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.zeta[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.zeta
    }

    /// Symmetric, unit diagonal, entries in `[0, 1]`.
    pub fn check_invariants(&self) -> bool {
        (0..self.n).all(|i| {
            self.get(i, i) == 1.0
                && (0..self.n).all(|j| {
                    let z = self.get(i, j);
                    z == self.get(j, i) && (0.0..=1.0).contains(&z)
                })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionEstimate {
    pub partition: Partition,
    /// `AR(c*, ζ)` of the chosen partition.
    pub score: f64,
    /// Index of the draw the estimate was taken from.
    pub draw_index: usize,
}

/// Running co-clustering and selection counts over a stream of draws.
#[derive(Debug, Clone, Default)]
pub struct DrawAccumulator {
    n: usize,
    n_draws: usize,
    pair_counts: Vec<u64>,
    selection_counts: Vec<u64>,
}

impl DrawAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn push_partition(&mut self, p: &Partition) -> Result<()> {
        if self.pair_counts.is_empty() && self.n_draws == 0 {
            self.n = p.len();
            self.pair_counts = vec![0; self.n * self.n];
        } else {
            p.check_len(self.n)?;
        }
        let n = self.n;
        let labels = p.labels();
        for i in 0..n {
            for j in i..n {
                if labels[i] == labels[j] {
                    self.pair_counts[i * n + j] += 1;
                }
            }
        }
        self.n_draws += 1;
        Ok(())
    }

    pub fn push(&mut self, draw: &Draw) -> Result<()> {
        if self.n_draws == 0 {
            self.selection_counts = vec![0; draw.selection.len()];
        } else if draw.selection.len() != self.selection_counts.len() {
            return Err(Error::LengthMismatch {
                expected: self.selection_counts.len(),
                found: draw.selection.len(),
            });
        }
        self.push_partition(&draw.partition)?;
        for j in draw.selection.selected() {
            self.selection_counts[j] += 1;
        }
        Ok(())
    }

    pub fn coclustering(&self) -> Result<CoClusteringMatrix> {
        if self.n_draws == 0 {
            return Err(Error::EmptyDraws);
        }
        let n = self.n;
        let m = self.n_draws as f64;
        let mut zeta = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let z = self.pair_counts[i * n + j] as f64 / m;
                zeta[i * n + j] = z;
                zeta[j * n + i] = z;
            }
        }
        Ok(CoClusteringMatrix {
            n,
            n_draws: self.n_draws,
            zeta,
        })
    }

    /// Fraction of draws selecting each feature; empty if only partitions
    /// were pushed.
    pub fn selection_frequencies(&self) -> Result<Vec<f64>> {
        if self.n_draws == 0 {
            return Err(Error::EmptyDraws);
        }
        let m = self.n_draws as f64;
        Ok(self.selection_counts.iter().map(|&c| c as f64 / m).collect())
    }
}

pub fn coclustering<I, P>(partitions: I) -> Result<CoClusteringMatrix>
where
    I: IntoIterator<Item = P>,
    P: Borrow<Partition>,
{
    let mut acc = DrawAccumulator::new();
    for p in partitions {
        acc.push_partition(p.borrow())?;
    }
    acc.coclustering()
}

/// `ζ` from a sequence of draws.
pub fn coclustering_draws(draws: &[Draw]) -> Result<CoClusteringMatrix> {
    coclustering(draws.iter().map(|d| &d.partition))
}

fn choose2(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Hubert–Arabie adjusted Rand index.
pub fn adjusted_rand(a: &Partition, b: &Partition) -> Result<f64> {
    b.check_len(a.len())?;
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let (ca, cb) = (a.canonical(), b.canonical());
    let (ka, kb) = (ca.n_clusters(), cb.n_clusters());
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in ca.labels().iter().zip(cb.labels()) {
        table[x * kb + y] += 1;
    }
    let index: u64 = table.iter().map(|&t| choose2(t)).sum();
    let sum_a: u64 = ca.sizes().iter().map(|&s| choose2(s as u64)).sum();
    let sum_b: u64 = cb.sizes().iter().map(|&s| choose2(s as u64)).sum();
    let total = choose2(n as u64) as f64;
    let expected = sum_a as f64 * sum_b as f64 / total;
    let max = 0.5 * (sum_a + sum_b) as f64;
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index as f64 - expected) / denom)
}

/// `AR(c, ζ)`: the adjusted Rand index with the co-membership indicators of
/// the second partition replaced by `ζ`.
pub fn ar_against_zeta(c: &Partition, zeta: &CoClusteringMatrix) -> Result<f64> {
    c.check_len(zeta.n)?;
    let n = zeta.n;
    if n < 2 {
        return Ok(1.0);
    }
    let labels = c.labels();
    let (mut a, mut b, mut z) = (0.0, 0u64, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let zij = zeta.get(i, j);
            z += zij;
            if labels[i] == labels[j] {
                b += 1;
                a += zij;
            }
        }
    }
    let b = b as f64;
    let total = choose2(n as u64) as f64;
    let expected = b * z / total;
    let denom = 0.5 * (b + z) - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((a - expected) / denom)
}

/// Picks the sampled partition maximizing `AR(c, ζ)`; ties go to the
/// earliest draw.
pub fn summarize_partition<I, P>(partitions: I, zeta: &CoClusteringMatrix) -> Result<PartitionEstimate>
where
    I: IntoIterator<Item = P>,
    P: Borrow<Partition>,
{
    let mut best: Option<PartitionEstimate> = None;
    for (idx, p) in partitions.into_iter().enumerate() {
        let p = p.borrow();
        let score = ar_against_zeta(p, zeta)?;
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(PartitionEstimate {
                partition: p.canonical(),
                score,
                draw_index: idx,
            });
        }
    }
    best.ok_or(Error::EmptyDraws)
}

/// Fraction of draws selecting each feature.
pub fn selection_frequencies(draws: &[Draw]) -> Result<Vec<f64>> {
    let mut acc = DrawAccumulator::new();
    for d in draws {
        acc.push(d)?;
    }
    acc.selection_frequencies()
}

/// Rank-based ROC AUC; ties count one half.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassTruth);
    }
    // Sum of midranks of the positives.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        rank_sum += midrank * order[start..end].iter().filter(|&&k| truth[k]).count() as f64;
        start = end;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}
