//! Dirichlet-tree-multinomial kernel with internal-node selection.
//!
//! Each internal node splits its sequences among its children with a
//! Dirichlet-distributed probability vector. Unselected nodes share one
//! vector across all samples; selected nodes get one per cluster. The
//! likelihood factorizes over nodes, so toggling a node only touches that
//! node's terms.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::math::{ln_gamma, LnGammaTable};
use crate::partition::Partition;
use crate::selection::Selection;
use crate::tree::{PhyloTree, TreeCounts};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtmHyper {
    pub alpha: f64,
    pub w: f64,
}

impl Default for DtmHyper {
    fn default() -> Self {
        Self { alpha: 1.0, w: 0.5 }
    }
}

impl DtmHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidHyper(alloc::format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.w > 0.0 && self.w < 1.0) {
            return Err(Error::InvalidHyper(alloc::format!("w must lie in (0,1), got {}", self.w)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtmStats {
    pub n: usize,
    /// Subtree totals summed over members, indexed by tree node.
    pub totals: Vec<u64>,
}

#[derive(Debug, Clone)]
struct InternalNode {
    node: usize,
    children: Vec<usize>,
    /// `ln Γ(Kα) - K ln Γ(α)`.
    norm: f64,
    /// Index into `DtmKernel::arity_tables`.
    table: usize,
}

#[derive(Debug, Clone)]
pub struct DtmKernel {
    hyper: DtmHyper,
    n: usize,
    n_nodes: usize,
    internal: Vec<InternalNode>,
    totals: Vec<u32>,
    /// Per sample: indices into `internal` with a nonzero node total.
    active: Vec<Vec<u32>>,
    global: Vec<u64>,
    ln_alpha: LnGammaTable,
    /// `ln Γ(k + Kα)` for each distinct arity `K`.
    arity_tables: Vec<(usize, LnGammaTable)>,
}

impl DtmKernel {
    pub fn new(tc: &TreeCounts, tree: &PhyloTree, hyper: DtmHyper) -> Result<Self> {
        hyper.validate()?;
        if tc.n_nodes() != tree.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: tree.n_nodes(),
                found: tc.n_nodes(),
            });
        }
        let n = tc.n_samples();
        let n_nodes = tree.n_nodes();
        let mut global = alloc::vec![0u64; n_nodes];
        for i in 0..n {
            for (g, &t) in global.iter_mut().zip(tc.sample(i)) {
                *g += t as u64;
            }
        }
        let grand = global[tree.root()];
        let mut arity_tables: Vec<(usize, LnGammaTable)> = Vec::new();
        let ln_ga = ln_gamma(hyper.alpha);
        let internal: Vec<InternalNode> = tree
            .internal_nodes()
            .iter()
            .map(|&v| {
                let k = tree.children(v).len();
                let table = match arity_tables.iter().position(|(a, _)| *a == k) {
                    Some(t) => t,
                    None => {
                        arity_tables.push((k, LnGammaTable::new(k as f64 * hyper.alpha, grand)));
                        arity_tables.len() - 1
                    }
                };
                InternalNode {
                    node: v,
                    children: tree.children(v).to_vec(),
                    norm: ln_gamma(k as f64 * hyper.alpha) - k as f64 * ln_ga,
                    table,
                }
            })
            .collect();
        let active = (0..n)
            .map(|i| {
                let row = tc.sample(i);
                internal
                    .iter()
                    .enumerate()
                    .filter(|(_, nd)| row[nd.node] > 0)
                    .map(|(idx, _)| idx as u32)
                    .collect()
            })
            .collect();
        Ok(Self {
            hyper,
            n,
            n_nodes,
            internal,
            totals: (0..n).flat_map(|i| tc.sample(i).iter().copied()).collect(),
            active,
            global,
            ln_alpha: LnGammaTable::new(hyper.alpha, grand),
            arity_tables,
        })
    }

    pub fn hyper(&self) -> &DtmHyper {
        &self.hyper
    }

    /// Tree node id of the `idx`-th internal node (selection order).
    pub fn internal_node(&self, idx: usize) -> usize {
        self.internal[idx].node
    }

    #[inline]
    fn sample(&self, i: usize) -> &[u32] {
        &self.totals[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    /// Log Dirichlet-multinomial factor of internal node `idx` for the given
    /// subtree totals. Zero when the node has no sequences.
    fn node_factor(&self, idx: usize, totals: &[u64]) -> f64 {
        let nd = &self.internal[idx];
        let t = totals[nd.node];
        if t == 0 {
            return 0.0;
        }
        let cats: f64 = nd.children.iter().map(|&k| self.ln_alpha.get(totals[k])).sum();
        nd.norm + cats - self.arity_tables[nd.table].1.get(t)
    }
}

impl Kernel for DtmKernel {
    type Stats = DtmStats;

    fn n_samples(&self) -> usize {
        self.n
    }

    fn n_features(&self) -> usize {
        self.internal.len()
    }

    fn inclusion_prior(&self) -> f64 {
        self.hyper.w
    }

    fn empty_stats(&self) -> DtmStats {
        DtmStats {
            n: 0,
            totals: alloc::vec![0; self.n_nodes],
        }
    }

    fn add_sample(&self, stats: &mut DtmStats, i: usize, _gamma: &Selection) {
        stats.n += 1;
        for (a, &t) in stats.totals.iter_mut().zip(self.sample(i)) {
            *a += t as u64;
        }
    }

    fn remove_sample(&self, stats: &mut DtmStats, i: usize, _gamma: &Selection) {
        stats.n -= 1;
        for (a, &t) in stats.totals.iter_mut().zip(self.sample(i)) {
            *a -= t as u64;
        }
    }

    fn merge_stats(&self, dst: &mut DtmStats, src: &DtmStats) {
        dst.n += src.n;
        for (a, b) in dst.totals.iter_mut().zip(&src.totals) {
            *a += b;
        }
    }

    fn cluster_size(&self, stats: &DtmStats) -> usize {
        stats.n
    }

    fn log_cluster_factor(&self, stats: &DtmStats, gamma: &Selection) -> f64 {
        gamma.selected().map(|idx| self.node_factor(idx, &stats.totals)).sum()
    }

    fn log_pooled_factor(&self, gamma: &Selection) -> f64 {
        gamma.unselected().map(|idx| self.node_factor(idx, &self.global)).sum()
    }

    fn log_predictive(&self, i: usize, stats: &DtmStats, gamma: &Selection) -> f64 {
        let row = self.sample(i);
        let mut out = 0.0;
        for &idx in &self.active[i] {
            let idx = idx as usize;
            if !gamma.is_selected(idx) {
                continue;
            }
            let nd = &self.internal[idx];
            for &k in &nd.children {
                let x = row[k] as u64;
                if x > 0 {
                    let t = stats.totals[k];
                    out += self.ln_alpha.get(t + x) - self.ln_alpha.get(t);
                }
            }
            let table = &self.arity_tables[nd.table].1;
            let t = stats.totals[nd.node];
            out -= table.get(t + row[nd.node] as u64) - table.get(t);
        }
        out
    }

    fn log_flip_delta(&self, clusters: &[DtmStats], gamma: &Selection, flips: &[usize]) -> f64 {
        let mut delta = 0.0;
        for &idx in flips {
            let split: f64 = clusters
                .iter()
                .filter(|s| s.n > 0)
                .map(|s| self.node_factor(idx, &s.totals))
                .sum();
            let pooled = self.node_factor(idx, &self.global);
            if gamma.is_selected(idx) {
                delta += pooled - split;
            } else {
                delta += split - pooled;
            }
        }
        delta
    }

    fn apply_flips(&self, _stats: &mut DtmStats, _gamma: &Selection, _flips: &[usize]) {}
}

/// `ln P(X | T, γ, c)` up to the multinomial coefficients.
pub fn log_dtm_selected_marginal(
    tc: &TreeCounts,
    tree: &PhyloTree,
    gamma: &Selection,
    c: &Partition,
    hyper: DtmHyper,
) -> Result<f64> {
    c.check_len(tc.n_samples())?;
    if gamma.len() != tree.internal_nodes().len() {
        return Err(Error::LengthMismatch {
            expected: tree.internal_nodes().len(),
            found: gamma.len(),
        });
    }
    Ok(DtmKernel::new(tc, tree, hyper)?.log_marginal(c, gamma))
}
