//! Dirichlet-multinomial kernel with OTU selection.
//!
//! Noise OTUs share one Dirichlet-distributed composition across all samples;
//! selected OTUs get a composition per cluster, and each cluster has its own
//! Beta-distributed share of noise sequences.

use alloc::vec::Vec;

use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::math::{ln_gamma, LnGammaTable};
use crate::partition::Partition;
use crate::selection::Selection;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmHyper {
    /// Symmetric Dirichlet concentration for both noise and selected OTUs.
    pub alpha: f64,
    /// Beta prior on the noise share (first shape goes with noise counts).
    pub beta1: f64,
    pub beta2: f64,
    /// Prior inclusion probability of each OTU.
    pub w: f64,
}

impl Default for DmHyper {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            w: 0.5,
        }
    }
}

impl DmHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidHyper(alloc::format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.w > 0.0 && self.w < 1.0) {
            return Err(Error::InvalidHyper(alloc::format!("w must lie in (0,1), got {}", self.w)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmStats {
    pub n: usize,
    /// Per-OTU count sums over members, all OTUs.
    pub sums: Vec<u64>,
    pub total: u64,
    /// Sum over selected OTUs; kept in step with the selection.
    pub informative: u64,
}

#[derive(Debug, Clone)]
pub struct DmKernel {
    hyper: DmHyper,
    n: usize,
    d: usize,
    /// Sparse rows: (column, count) for nonzero entries.
    nonzeros: Vec<Vec<(u32, u32)>>,
    row_totals: Vec<u64>,
    column_sums: Vec<u64>,
    ln_alpha: LnGammaTable,
    ln_beta1: LnGammaTable,
    ln_beta2: LnGammaTable,
    ln_beta12: LnGammaTable,
    ln_gamma_alpha: f64,
    beta_const: f64,
}

impl DmKernel {
    pub fn new(m: &CountMatrix, hyper: DmHyper) -> Result<Self> {
        hyper.validate()?;
        let n = m.n_samples();
        let d = m.n_features();
        let nonzeros = (0..n)
            .map(|i| {
                m.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &y)| y > 0)
                    .map(|(j, &y)| (j as u32, y))
                    .collect()
            })
            .collect();
        let row_totals = (0..n).map(|i| m.row_sum(i)).collect();
        let total = m.total();
        Ok(Self {
            hyper,
            n,
            d,
            nonzeros,
            row_totals,
            column_sums: m.column_sums(),
            ln_alpha: LnGammaTable::new(hyper.alpha, total),
            ln_beta1: LnGammaTable::new(hyper.beta1, total),
            ln_beta2: LnGammaTable::new(hyper.beta2, total),
            ln_beta12: LnGammaTable::new(hyper.beta1 + hyper.beta2, total),
            ln_gamma_alpha: ln_gamma(hyper.alpha),
            beta_const: ln_gamma(hyper.beta1 + hyper.beta2) - ln_gamma(hyper.beta1) - ln_gamma(hyper.beta2),
        })
    }

    pub fn hyper(&self) -> &DmHyper {
        &self.hyper
    }

    /// `ln Γ(kα) - k ln Γ(α)`, the Dirichlet normalizer over `k` categories.
    fn dirichlet_const(&self, k: usize) -> f64 {
        ln_gamma(k as f64 * self.hyper.alpha) - k as f64 * self.ln_gamma_alpha
    }

    fn beta_factor(&self, noise: u64, informative: u64) -> f64 {
        self.beta_const + self.ln_beta1.get(noise) + self.ln_beta2.get(informative)
            - self.ln_beta12.get(noise + informative)
    }

    /// Selected-OTU Dirichlet-multinomial factor of one cluster.
    pub fn log_informative_factor(&self, stats: &DmStats, gamma: &Selection) -> f64 {
        if stats.n == 0 {
            return 0.0;
        }
        let k = gamma.count();
        let cats: f64 = gamma.selected().map(|j| self.ln_alpha.get(stats.sums[j])).sum();
        self.dirichlet_const(k) + cats - ln_gamma(stats.informative as f64 + k as f64 * self.hyper.alpha)
    }

    /// Beta factor on the noise/informative split of one cluster.
    pub fn log_noise_share_factor(&self, stats: &DmStats) -> f64 {
        if stats.n == 0 {
            return 0.0;
        }
        self.beta_factor(stats.total - stats.informative, stats.informative)
    }

    /// Sample `i`'s count over selected OTUs.
    pub fn informative_count(&self, i: usize, gamma: &Selection) -> u64 {
        self.nonzeros[i]
            .iter()
            .filter(|(j, _)| gamma.is_selected(*j as usize))
            .map(|&(_, y)| y as u64)
            .sum()
    }
}

impl Kernel for DmKernel {
    type Stats = DmStats;

    fn n_samples(&self) -> usize {
        self.n
    }

    fn n_features(&self) -> usize {
        self.d
    }

    fn inclusion_prior(&self) -> f64 {
        self.hyper.w
    }

    fn empty_stats(&self) -> DmStats {
        DmStats {
            n: 0,
            sums: alloc::vec![0; self.d],
            total: 0,
            informative: 0,
        }
    }

    fn add_sample(&self, stats: &mut DmStats, i: usize, gamma: &Selection) {
        stats.n += 1;
        stats.total += self.row_totals[i];
        for &(j, y) in &self.nonzeros[i] {
            stats.sums[j as usize] += y as u64;
            if gamma.is_selected(j as usize) {
                stats.informative += y as u64;
            }
        }
    }

    fn remove_sample(&self, stats: &mut DmStats, i: usize, gamma: &Selection) {
        stats.n -= 1;
        stats.total -= self.row_totals[i];
        for &(j, y) in &self.nonzeros[i] {
            stats.sums[j as usize] -= y as u64;
            if gamma.is_selected(j as usize) {
                stats.informative -= y as u64;
            }
        }
    }

    fn merge_stats(&self, dst: &mut DmStats, src: &DmStats) {
        dst.n += src.n;
        dst.total += src.total;
        dst.informative += src.informative;
        for (a, b) in dst.sums.iter_mut().zip(&src.sums) {
            *a += b;
        }
    }

    fn cluster_size(&self, stats: &DmStats) -> usize {
        stats.n
    }

    fn log_cluster_factor(&self, stats: &DmStats, gamma: &Selection) -> f64 {
        self.log_noise_share_factor(stats) + self.log_informative_factor(stats, gamma)
    }

    fn log_pooled_factor(&self, gamma: &Selection) -> f64 {
        let k = self.d - gamma.count();
        if k == 0 {
            return 0.0;
        }
        let mut noise_total = 0u64;
        let mut cats = 0.0;
        for j in gamma.unselected() {
            noise_total += self.column_sums[j];
            cats += self.ln_alpha.get(self.column_sums[j]);
        }
        self.dirichlet_const(k) + cats - ln_gamma(noise_total as f64 + k as f64 * self.hyper.alpha)
    }

    fn log_predictive(&self, i: usize, stats: &DmStats, gamma: &Selection) -> f64 {
        let mut cats = 0.0;
        let mut inf_i = 0u64;
        for &(j, y) in &self.nonzeros[i] {
            let j = j as usize;
            if gamma.is_selected(j) {
                let s = stats.sums[j];
                cats += self.ln_alpha.get(s + y as u64) - self.ln_alpha.get(s);
                inf_i += y as u64;
            }
        }
        let noise_i = self.row_totals[i] - inf_i;
        let noise_c = stats.total - stats.informative;
        let inf_c = stats.informative;
        let ka = gamma.count() as f64 * self.hyper.alpha;
        let beta = self.ln_beta1.get(noise_c + noise_i) - self.ln_beta1.get(noise_c)
            + self.ln_beta2.get(inf_c + inf_i)
            - self.ln_beta2.get(inf_c)
            - self.ln_beta12.get(stats.total + self.row_totals[i])
            + self.ln_beta12.get(stats.total);
        let norm = ln_gamma((inf_c + inf_i) as f64 + ka) - ln_gamma(inf_c as f64 + ka);
        beta + cats - norm
    }

    fn log_flip_delta(&self, clusters: &[DmStats], gamma: &Selection, flips: &[usize]) -> f64 {
        let flipped = gamma.flipped(flips);
        let k_old = gamma.count();
        let k_new = flipped.count();
        let a = self.hyper.alpha;
        let mut delta = self.log_pooled_factor(&flipped) - self.log_pooled_factor(gamma);
        let const_delta = self.dirichlet_const(k_new) - self.dirichlet_const(k_old);
        for stats in clusters {
            if stats.n == 0 {
                continue;
            }
            let mut inf = stats.informative as i64;
            let mut cats = 0.0;
            for &j in flips {
                let s = stats.sums[j];
                if flipped.is_selected(j) {
                    inf += s as i64;
                    cats += self.ln_alpha.get(s);
                } else {
                    inf -= s as i64;
                    cats -= self.ln_alpha.get(s);
                }
            }
            let inf_new = inf as u64;
            let inf_old = stats.informative;
            delta += self.beta_factor(stats.total - inf_new, inf_new)
                - self.beta_factor(stats.total - inf_old, inf_old);
            delta += const_delta + cats
                - (ln_gamma(inf_new as f64 + k_new as f64 * a) - ln_gamma(inf_old as f64 + k_old as f64 * a));
        }
        delta
    }

    fn apply_flips(&self, stats: &mut DmStats, gamma: &Selection, flips: &[usize]) {
        for &j in flips {
            if gamma.is_selected(j) {
                stats.informative += stats.sums[j];
            } else {
                stats.informative -= stats.sums[j];
            }
        }
    }
}

/// `ln P(Y | γ, c)` up to the multinomial coefficient.
pub fn log_dm_selected_marginal(
    m: &CountMatrix,
    gamma: &Selection,
    c: &Partition,
    hyper: DmHyper,
) -> Result<f64> {
    c.check_len(m.n_samples())?;
    if gamma.len() != m.n_features() {
        return Err(Error::LengthMismatch {
            expected: m.n_features(),
            found: gamma.len(),
        });
    }
    Ok(DmKernel::new(m, hyper)?.log_marginal(c, gamma))
}
