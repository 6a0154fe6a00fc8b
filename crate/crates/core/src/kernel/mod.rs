//! Collapsed component likelihoods.
//!
//! A kernel splits the log marginal likelihood `ln P(X | γ, c)` into a pooled
//! factor that depends only on `γ` and one factor per cluster. Multinomial
//! coefficients do not depend on `(γ, c)` and are dropped, so every value is
//! defined up to a model constant.

pub mod dm;
pub mod dtm;

use alloc::vec::Vec;
use core::fmt::Debug;

use crate::partition::Partition;
use crate::selection::Selection;

pub trait Kernel {
    /// Per-cluster sufficient statistics.
    type Stats: Clone + Debug + PartialEq;

    fn n_samples(&self) -> usize;

    /// Length of the selection vector.
    fn n_features(&self) -> usize;

    /// Bernoulli prior inclusion probability for one feature.
    fn inclusion_prior(&self) -> f64;

    fn empty_stats(&self) -> Self::Stats;

    fn add_sample(&self, stats: &mut Self::Stats, i: usize, gamma: &Selection);

    fn remove_sample(&self, stats: &mut Self::Stats, i: usize, gamma: &Selection);

    /// Adds `src` into `dst`.
    fn merge_stats(&self, dst: &mut Self::Stats, src: &Self::Stats);

    fn cluster_size(&self, stats: &Self::Stats) -> usize;

    /// Cluster-specific log factor. Zero for an empty cluster.
    fn log_cluster_factor(&self, stats: &Self::Stats, gamma: &Selection) -> f64;

    /// Log factor shared by all samples (unselected features).
    fn log_pooled_factor(&self, gamma: &Selection) -> f64;

    /// `ln` posterior predictive of sample `i` given a cluster that excludes it.
    fn log_predictive(&self, i: usize, stats: &Self::Stats, gamma: &Selection) -> f64;

    /// Change in the total log marginal when the features in `flips` are
    /// toggled, holding the partition fixed. `flips` holds distinct indices.
    fn log_flip_delta(&self, clusters: &[Self::Stats], gamma: &Selection, flips: &[usize]) -> f64 {
        let flipped = gamma.flipped(flips);
        let mut delta = self.log_pooled_factor(&flipped) - self.log_pooled_factor(gamma);
        for stats in clusters {
            let mut moved = stats.clone();
            self.apply_flips(&mut moved, &flipped, flips);
            delta += self.log_cluster_factor(&moved, &flipped) - self.log_cluster_factor(stats, gamma);
        }
        delta
    }

    /// Updates selection-dependent caches after `flips` produced `gamma`.
    fn apply_flips(&self, stats: &mut Self::Stats, gamma: &Selection, flips: &[usize]);

    fn stats_for(&self, members: &[usize], gamma: &Selection) -> Self::Stats {
        let mut s = self.empty_stats();
        for &i in members {
            self.add_sample(&mut s, i, gamma);
        }
        s
    }

    /// Full log marginal `ln P(X | γ, c)` from scratch.
    fn log_marginal(&self, partition: &Partition, gamma: &Selection) -> f64 {
        let clusters: Vec<Self::Stats> = partition
            .clusters()
            .iter()
            .map(|m| self.stats_for(m, gamma))
            .collect();
        self.log_pooled_factor(gamma)
            + clusters
                .iter()
                .map(|s| self.log_cluster_factor(s, gamma))
                .sum::<f64>()
    }
}
