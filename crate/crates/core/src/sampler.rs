//! MCMC over (partition, selection).
//!
//! Each iteration runs a batch of Metropolis add/delete/swap moves on the
//! selection vector with the partition fixed, then one split-merge move on
//! the partition with the selection fixed. Split-merge picks two anchor
//! samples uniformly; when no other sample shares a cluster with either
//! anchor a plain split/merge is proposed, otherwise a restricted-Gibbs
//! launch state drives the proposal.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::math::{ln, log_add_exp};
use crate::partition::Partition;
use crate::prior::{PairMove, PartitionPrior};
use crate::selection::Selection;

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Metropolis selection moves per iteration.
    pub gamma_moves_per_iter: usize,
    /// Intermediate restricted Gibbs scans when building a launch state.
    pub launch_scans: usize,
    pub seed: u64,
    /// Recompute all caches from scratch after every iteration and fail on
    /// any disagreement. Slow; meant for tests.
    pub check_caches: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 10_000,
            thinning: 10,
            gamma_moves_per_iter: 20,
            launch_scans: 20,
            seed: 0,
            check_caches: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(alloc::format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in,
                self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of draws a run keeps.
    pub fn n_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }

    fn keeps(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in).is_multiple_of(self.thinning)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptStats {
    pub gamma_add_delete: MoveStats,
    pub gamma_swap: MoveStats,
    pub simple_split: MoveStats,
    pub simple_merge: MoveStats,
    pub restricted_split: MoveStats,
    pub restricted_merge: MoveStats,
}

impl AcceptStats {
    pub fn named(&self) -> [(&'static str, MoveStats); 6] {
        [
            ("gamma_add_delete", self.gamma_add_delete),
            ("gamma_swap", self.gamma_swap),
            ("simple_split", self.simple_split),
            ("simple_merge", self.simple_merge),
            ("restricted_split", self.restricted_split),
            ("restricted_merge", self.restricted_merge),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    /// 1-based iteration the draw was taken after.
    pub iteration: usize,
    /// Canonically labeled partition.
    pub partition: Partition,
    pub selection: Selection,
    /// `ln P(c) + ln p(γ) + ln P(X | γ, c)`, up to the model constant.
    pub log_posterior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub draws: Vec<Draw>,
    pub accept: AcceptStats,
}

/// Outcome of one split-merge proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub kind: PairMove,
    pub restricted: bool,
    pub log_accept_ratio: f64,
    pub accepted: bool,
}

/// Restricted-Gibbs launch state for anchors `i` and `l` and the samples
/// `members` that share a cluster with either anchor.
#[derive(Debug, Clone)]
pub struct LaunchState<S> {
    pub anchor_i: usize,
    pub anchor_l: usize,
    pub members: Vec<usize>,
    /// `true` when the member sits with anchor `i`.
    pub with_i: Vec<bool>,
    pub stats_i: S,
    pub stats_l: S,
}

impl<S: Clone> LaunchState<S> {
    /// Anchors alone on their sides, members assigned by fair coin flips.
    pub fn random<K, R>(kernel: &K, gamma: &Selection, i: usize, l: usize, members: Vec<usize>, rng: &mut R) -> Self
    where
        K: Kernel<Stats = S>,
        R: Rng + ?Sized,
    {
        let mut stats_i = kernel.stats_for(&[i], gamma);
        let mut stats_l = kernel.stats_for(&[l], gamma);
        let with_i: Vec<bool> = members.iter().map(|_| rng.random::<bool>()).collect();
        for (&s, &side) in members.iter().zip(&with_i) {
            if side {
                kernel.add_sample(&mut stats_i, s, gamma);
            } else {
                kernel.add_sample(&mut stats_l, s, gamma);
            }
        }
        Self {
            anchor_i: i,
            anchor_l: l,
            members,
            with_i,
            stats_i,
            stats_l,
        }
    }

    /// `ln Pr(member goes with i)` and `ln Pr(member goes with l)` given the
    /// current launch state, with the member removed from both sides.
    fn side_log_probs<K: Kernel<Stats = S>>(&self, kernel: &K, gamma: &Selection, s: usize) -> (f64, f64) {
        let qi = ln(kernel.cluster_size(&self.stats_i) as f64) + kernel.log_predictive(s, &self.stats_i, gamma);
        let ql = ln(kernel.cluster_size(&self.stats_l) as f64) + kernel.log_predictive(s, &self.stats_l, gamma);
        let norm = log_add_exp(qi, ql);
        (qi - norm, ql - norm)
    }

    fn detach<K: Kernel<Stats = S>>(&mut self, kernel: &K, gamma: &Selection, idx: usize) {
        let s = self.members[idx];
        if self.with_i[idx] {
            kernel.remove_sample(&mut self.stats_i, s, gamma);
        } else {
            kernel.remove_sample(&mut self.stats_l, s, gamma);
        }
    }

    fn attach<K: Kernel<Stats = S>>(&mut self, kernel: &K, gamma: &Selection, idx: usize, with_i: bool) {
        let s = self.members[idx];
        self.with_i[idx] = with_i;
        if with_i {
            kernel.add_sample(&mut self.stats_i, s, gamma);
        } else {
            kernel.add_sample(&mut self.stats_l, s, gamma);
        }
    }

    /// One sequential restricted Gibbs scan over the members. Returns the log
    /// probability of the allocations it drew.
    pub fn gibbs_scan<K, R>(&mut self, kernel: &K, gamma: &Selection, rng: &mut R) -> f64
    where
        K: Kernel<Stats = S>,
        R: Rng + ?Sized,
    {
        let mut log_q = 0.0;
        for idx in 0..self.members.len() {
            self.detach(kernel, gamma, idx);
            let (lp_i, lp_l) = self.side_log_probs(kernel, gamma, self.members[idx]);
            let go_i = rng.random::<f64>() < crate::math::exp(lp_i);
            log_q += if go_i { lp_i } else { lp_l };
            self.attach(kernel, gamma, idx, go_i);
        }
        log_q
    }

    /// Log probability that one scan from this state produces `target`
    /// (member sides, `true` = with `i`). Leaves the state at `target`.
    pub fn force_scan<K: Kernel<Stats = S>>(&mut self, kernel: &K, gamma: &Selection, target: &[bool]) -> f64 {
        let mut log_q = 0.0;
        for (idx, &side) in target.iter().enumerate() {
            self.detach(kernel, gamma, idx);
            let (lp_i, lp_l) = self.side_log_probs(kernel, gamma, self.members[idx]);
            log_q += if side { lp_i } else { lp_l };
            self.attach(kernel, gamma, idx, side);
        }
        log_q
    }
}

/// Sampler state. Cluster statistics are kept in step with the labels and
/// the selection; `log_lik` caches the kernel's log marginal.
#[derive(Debug, Clone)]
pub struct McmcState<S> {
    labels: Vec<usize>,
    clusters: Vec<S>,
    selection: Selection,
    log_lik: f64,
    rng: ChaCha8Rng,
    accept: AcceptStats,
}

impl<S: Clone + PartialEq + core::fmt::Debug> McmcState<S> {
    pub fn new<K: Kernel<Stats = S>>(kernel: &K, partition: &Partition, selection: Selection, seed: u64) -> Result<Self> {
        partition.check_len(kernel.n_samples())?;
        if selection.len() != kernel.n_features() {
            return Err(Error::LengthMismatch {
                expected: kernel.n_features(),
                found: selection.len(),
            });
        }
        let canon = partition.canonical();
        let clusters = canon
            .clusters()
            .iter()
            .map(|m| kernel.stats_for(m, &selection))
            .collect();
        let mut state = Self {
            labels: canon.labels().to_vec(),
            clusters,
            selection,
            log_lik: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            accept: AcceptStats::default(),
        };
        state.log_lik = state.scratch_log_lik(kernel);
        Ok(state)
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.labels.clone()).canonical()
    }

    pub fn selection(&self) -> &Selection {
        &self.selection
    }

    pub fn cluster_stats(&self) -> &[S] {
        &self.clusters
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn log_lik(&self) -> f64 {
        self.log_lik
    }

    pub fn accept_stats(&self) -> &AcceptStats {
        &self.accept
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn scratch_log_lik<K: Kernel<Stats = S>>(&self, kernel: &K) -> f64 {
        kernel.log_pooled_factor(&self.selection)
            + self
                .clusters
                .iter()
                .map(|s| kernel.log_cluster_factor(s, &self.selection))
                .sum::<f64>()
    }

    /// Refreshes `log_lik` from the cluster statistics.
    pub fn resync_log_lik<K: Kernel<Stats = S>>(&mut self, kernel: &K) {
        self.log_lik = self.scratch_log_lik(kernel);
    }

    pub fn log_posterior<K: Kernel<Stats = S>>(&self, kernel: &K, prior: &PartitionPrior) -> f64 {
        let sizes: Vec<usize> = self.clusters.iter().map(|s| kernel.cluster_size(s)).collect();
        prior.log_prior_sizes(&sizes).unwrap_or(f64::NAN)
            + self.selection.log_prior(kernel.inclusion_prior())
            + self.log_lik
    }

    /// Compares every cache against a from-scratch recomputation.
    pub fn check_consistency<K: Kernel<Stats = S>>(&self, kernel: &K) -> core::result::Result<(), String> {
        let n: usize = self.clusters.iter().map(|s| kernel.cluster_size(s)).sum();
        if n != kernel.n_samples() {
            return Err(alloc::format!("cluster sizes sum to {n}, expected {}", kernel.n_samples()));
        }
        for (c, stats) in self.clusters.iter().enumerate() {
            let members: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i] == c).collect();
            if members.is_empty() {
                return Err(alloc::format!("cluster {c} is empty"));
            }
            if kernel.stats_for(&members, &self.selection) != *stats {
                return Err(alloc::format!("cluster {c} statistics drifted"));
            }
        }
        if self.labels.iter().any(|&l| l >= self.clusters.len()) {
            return Err("label without cluster".into());
        }
        if self.selection.count() == 0 {
            return Err("empty selection".into());
        }
        let fresh = kernel.log_marginal(&self.partition(), &self.selection);
        if (fresh - self.log_lik).abs() > 1e-8 {
            return Err(alloc::format!("cached log likelihood {} vs {}", self.log_lik, fresh));
        }
        Ok(())
    }

    /// `repeats` Metropolis steps on the selection with the partition fixed.
    pub fn update_gamma<K: Kernel<Stats = S>>(&mut self, kernel: &K, repeats: usize) {
        let d = self.selection.len();
        let w = kernel.inclusion_prior();
        let log_odds = ln(w) - ln(1.0 - w);
        for _ in 0..repeats {
            let (flips, log_prior_ratio, swap): (Vec<usize>, f64, bool) = if self.rng.random::<f64>() < 0.5 {
                let j = self.rng.random_range(0..d);
                let removing = self.selection.is_selected(j);
                if removing && self.selection.count() == 1 {
                    self.accept.gamma_add_delete.record(false);
                    continue;
                }
                (alloc::vec![j], if removing { -log_odds } else { log_odds }, false)
            } else {
                let ones = self.selection.count();
                let zeros = d - ones;
                if zeros == 0 {
                    self.accept.gamma_swap.record(false);
                    continue;
                }
                let a = self.rng.random_range(0..ones);
                let b = self.rng.random_range(0..zeros);
                let one = self.selection.selected().nth(a).expect("selected index");
                let zero = self.selection.unselected().nth(b).expect("unselected index");
                (alloc::vec![zero, one], 0.0, true)
            };
            let delta = kernel.log_flip_delta(&self.clusters, &self.selection, &flips);
            let log_ratio = delta + log_prior_ratio;
            let accepted = log_ratio >= 0.0 || ln(self.rng.random::<f64>()) < log_ratio;
            if swap {
                self.accept.gamma_swap.record(accepted);
            } else {
                self.accept.gamma_add_delete.record(accepted);
            }
            if accepted {
                for &j in &flips {
                    self.selection.flip(j);
                }
                for stats in &mut self.clusters {
                    kernel.apply_flips(stats, &self.selection, &flips);
                }
                self.log_lik += delta;
            }
        }
    }

    /// Samples other than `i` and `l` sharing a cluster with either.
    pub fn companions(&self, i: usize, l: usize) -> Vec<usize> {
        let (ci, cl) = (self.labels[i], self.labels[l]);
        (0..self.labels.len())
            .filter(|&s| s != i && s != l && (self.labels[s] == ci || self.labels[s] == cl))
            .collect()
    }

    /// One split-merge move with uniformly drawn anchors.
    pub fn split_merge<K: Kernel<Stats = S>>(&mut self, kernel: &K, prior: &PartitionPrior, scans: usize) -> Option<Proposal> {
        let n = self.labels.len();
        if n < 2 {
            return None;
        }
        let i = self.rng.random_range(0..n);
        let mut l = self.rng.random_range(0..n - 1);
        if l >= i {
            l += 1;
        }
        let members = self.companions(i, l);
        Some(if members.is_empty() {
            self.simple_split_merge(kernel, prior, i, l)
        } else {
            self.restricted_split_merge(kernel, prior, i, l, members, scans)
        })
    }

    fn accept_with(&mut self, log_ratio: f64) -> bool {
        log_ratio >= 0.0 || ln(self.rng.random::<f64>()) < log_ratio
    }

    /// Split/merge of anchors that have no cluster companions. The proposal
    /// ratio is one in both directions.
    pub fn simple_split_merge<K: Kernel<Stats = S>>(&mut self, kernel: &K, prior: &PartitionPrior, i: usize, l: usize) -> Proposal {
        let gamma = &self.selection;
        let (ci, cl) = (self.labels[i], self.labels[l]);
        let k = self.clusters.len();
        if ci == cl {
            let si = kernel.stats_for(&[i], gamma);
            let sl = kernel.stats_for(&[l], gamma);
            let old = kernel.log_cluster_factor(&self.clusters[ci], gamma);
            let lik = kernel.log_cluster_factor(&si, gamma) + kernel.log_cluster_factor(&sl, gamma) - old;
            let log_ratio = prior.log_pair_ratio(PairMove::Split, 1, 1, k).unwrap_or(f64::NEG_INFINITY) + lik;
            let accepted = self.accept_with(log_ratio);
            self.accept.simple_split.record(accepted);
            if accepted {
                self.clusters[ci] = sl;
                self.clusters.push(si);
                self.labels[i] = k;
                self.log_lik += lik;
            }
            Proposal {
                kind: PairMove::Split,
                restricted: false,
                log_accept_ratio: log_ratio,
                accepted,
            }
        } else {
            let mut merged = self.clusters[cl].clone();
            kernel.merge_stats(&mut merged, &self.clusters[ci]);
            let lik = kernel.log_cluster_factor(&merged, gamma)
                - kernel.log_cluster_factor(&self.clusters[ci], gamma)
                - kernel.log_cluster_factor(&self.clusters[cl], gamma);
            let n_i = kernel.cluster_size(&self.clusters[ci]);
            let n_l = kernel.cluster_size(&self.clusters[cl]);
            let log_ratio = prior.log_pair_ratio(PairMove::Merge, n_i, n_l, k).unwrap_or(f64::NEG_INFINITY) + lik;
            let accepted = self.accept_with(log_ratio);
            self.accept.simple_merge.record(accepted);
            if accepted {
                self.clusters[cl] = merged;
                self.merge_labels(ci, cl);
                self.log_lik += lik;
            }
            Proposal {
                kind: PairMove::Merge,
                restricted: false,
                log_accept_ratio: log_ratio,
                accepted,
            }
        }
    }

    /// Moves every member of cluster `from` into `into` and drops `from`.
    fn merge_labels(&mut self, from: usize, into: usize) {
        for l in self.labels.iter_mut() {
            if *l == from {
                *l = into;
            }
        }
        let last = self.clusters.len() - 1;
        self.clusters.swap_remove(from);
        if from != last {
            for l in self.labels.iter_mut() {
                if *l == last {
                    *l = from;
                }
            }
        }
    }

    /// Split-merge through a restricted-Gibbs launch state. `members` are the
    /// anchors' cluster companions and must be nonempty.
    pub fn restricted_split_merge<K: Kernel<Stats = S>>(
        &mut self,
        kernel: &K,
        prior: &PartitionPrior,
        i: usize,
        l: usize,
        members: Vec<usize>,
        scans: usize,
    ) -> Proposal {
        let (ci, cl) = (self.labels[i], self.labels[l]);
        let k = self.clusters.len();
        let gamma = self.selection.clone();
        let mut launch = LaunchState::random(kernel, &gamma, i, l, members, &mut self.rng);
        for _ in 0..scans {
            launch.gibbs_scan(kernel, &gamma, &mut self.rng);
        }
        if ci == cl {
            let log_q = launch.gibbs_scan(kernel, &gamma, &mut self.rng);
            let n_i = kernel.cluster_size(&launch.stats_i);
            let n_l = kernel.cluster_size(&launch.stats_l);
            let lik = kernel.log_cluster_factor(&launch.stats_i, &gamma)
                + kernel.log_cluster_factor(&launch.stats_l, &gamma)
                - kernel.log_cluster_factor(&self.clusters[ci], &gamma);
            let log_ratio = -log_q + prior.log_pair_ratio(PairMove::Split, n_i, n_l, k).unwrap_or(f64::NEG_INFINITY) + lik;
            let accepted = self.accept_with(log_ratio);
            self.accept.restricted_split.record(accepted);
            if accepted {
                self.labels[i] = k;
                for (&s, &side) in launch.members.iter().zip(&launch.with_i) {
                    if side {
                        self.labels[s] = k;
                    }
                }
                self.clusters[ci] = launch.stats_l;
                self.clusters.push(launch.stats_i);
                self.log_lik += lik;
            }
            Proposal {
                kind: PairMove::Split,
                restricted: true,
                log_accept_ratio: log_ratio,
                accepted,
            }
        } else {
            let original: Vec<bool> = launch.members.iter().map(|&s| self.labels[s] == ci).collect();
            let log_q = launch.force_scan(kernel, &gamma, &original);
            let mut merged = self.clusters[cl].clone();
            kernel.merge_stats(&mut merged, &self.clusters[ci]);
            let n_i = kernel.cluster_size(&self.clusters[ci]);
            let n_l = kernel.cluster_size(&self.clusters[cl]);
            let lik = kernel.log_cluster_factor(&merged, &gamma)
                - kernel.log_cluster_factor(&self.clusters[ci], &gamma)
                - kernel.log_cluster_factor(&self.clusters[cl], &gamma);
            let log_ratio = log_q + prior.log_pair_ratio(PairMove::Merge, n_i, n_l, k).unwrap_or(f64::NEG_INFINITY) + lik;
            let accepted = self.accept_with(log_ratio);
            self.accept.restricted_merge.record(accepted);
            if accepted {
                self.clusters[cl] = merged;
                self.merge_labels(ci, cl);
                self.log_lik += lik;
            }
            Proposal {
                kind: PairMove::Merge,
                restricted: true,
                log_accept_ratio: log_ratio,
                accepted,
            }
        }
    }

    /// One full iteration: selection moves, then one split-merge move.
    pub fn step<K: Kernel<Stats = S>>(&mut self, kernel: &K, prior: &PartitionPrior, config: &McmcConfig) {
        self.update_gamma(kernel, config.gamma_moves_per_iter);
        self.split_merge(kernel, prior, config.launch_scans);
        self.resync_log_lik(kernel);
    }

    pub fn snapshot<K: Kernel<Stats = S>>(&self, kernel: &K, prior: &PartitionPrior, iteration: usize) -> Draw {
        Draw {
            iteration,
            partition: self.partition(),
            selection: self.selection.clone(),
            log_posterior: self.log_posterior(kernel, prior),
        }
    }
}

fn check_prior<K: Kernel>(kernel: &K, prior: &PartitionPrior) -> Result<()> {
    if prior.n() != kernel.n_samples() {
        return Err(Error::InvalidConfig(alloc::format!(
            "prior bound to N = {} but data has {} samples",
            prior.n(),
            kernel.n_samples()
        )));
    }
    Ok(())
}

/// Runs a chain from one cluster with every feature selected, calling
/// `on_draw` for each kept iteration.
pub fn run_chain<K, F>(kernel: &K, prior: &PartitionPrior, config: &McmcConfig, mut on_draw: F) -> Result<AcceptStats>
where
    K: Kernel,
    F: FnMut(&McmcState<K::Stats>, usize),
{
    config.validate()?;
    check_prior(kernel, prior)?;
    let mut state = McmcState::new(
        kernel,
        &Partition::single_cluster(kernel.n_samples()),
        Selection::all(kernel.n_features()),
        config.seed,
    )?;
    for iteration in 1..=config.iterations {
        state.step(kernel, prior, config);
        if config.check_caches {
            state
                .check_consistency(kernel)
                .map_err(|e| Error::InvalidConfig(alloc::format!("iteration {iteration}: {e}")))?;
        }
        if config.keeps(iteration) {
            on_draw(&state, iteration);
        }
    }
    Ok(state.accept)
}

/// Runs a chain and keeps the thinned post-burn-in draws.
pub fn run_mcmc<K: Kernel>(kernel: &K, prior: &PartitionPrior, config: &McmcConfig) -> Result<ChainDraws> {
    let mut draws = Vec::with_capacity(config.n_draws());
    let accept = run_chain(kernel, prior, config, |state, iteration| {
        draws.push(state.snapshot(kernel, prior, iteration));
    })?;
    Ok(ChainDraws { draws, accept })
}
