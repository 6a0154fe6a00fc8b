//! Independent reference computations shared by the integration tests and
//! the acceptance suite. Nothing here calls into the kernels or the prior
//! module except where the check is explicitly about the sampler.
#![allow(dead_code)]

use std::collections::HashMap;

use mfmclust_core::math::ln_gamma;
use mfmclust_core::partition::all_set_partitions;
use mfmclust_core::{Kernel, Partition, PhyloTree, Selection};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln p_M(m)` for a Poisson(`lambda`) shifted to start at 1.
pub fn shifted_poisson_log_pmf(m: usize, lambda: f64) -> f64 {
    if m == 0 {
        return f64::NEG_INFINITY;
    }
    let k = (m - 1) as f64;
    k * lambda.ln() - lambda - ln_gamma(k + 1.0)
}

/// `ln V_N(R)` by summing `terms` terms of the defining series.
pub fn brute_log_vn(n: usize, r: usize, eta: f64, lambda: f64, terms: usize) -> f64 {
    let xs: Vec<f64> = (r.max(1)..r.max(1) + terms)
        .map(|m| {
            let m_f = m as f64;
            ln_gamma(m_f + 1.0) - ln_gamma((m - r) as f64 + 1.0) + ln_gamma(eta * m_f)
                - ln_gamma(eta * m_f + n as f64)
                + shifted_poisson_log_pmf(m, lambda)
        })
        .collect();
    log_sum_exp(&xs)
}

/// `ln P(c)` under the MFM prior with a shifted Poisson on the number of
/// components.
pub fn mfm_log_prior(sizes: &[usize], eta: f64, lambda: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    brute_log_vn(n, sizes.len(), eta, lambda, 400)
        + sizes
            .iter()
            .map(|&s| ln_gamma(s as f64 + eta) - ln_gamma(eta))
            .sum::<f64>()
}

pub fn sample_dirichlet<R: Rng>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).unwrap().sample(rng))
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

/// Mean and standard error of i.i.d. values.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of `P(Y | γ, c)` without multinomial coefficients,
/// drawing the parameters of the OTU-selection model from their priors.
pub fn mc_dm_marginal<R: Rng>(
    rows: &[Vec<u32>],
    c: &Partition,
    gamma: &Selection,
    alpha: f64,
    beta: (f64, f64),
    draws: usize,
    rng: &mut R,
) -> (f64, f64) {
    let d = gamma.len();
    let sel: Vec<usize> = gamma.selected().collect();
    let unsel: Vec<usize> = gamma.unselected().collect();
    let clusters = c.clusters();
    let beta_dist = (Gamma::new(beta.0, 1.0).unwrap(), Gamma::new(beta.1, 1.0).unwrap());
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        let noise_comp = if unsel.is_empty() {
            Vec::new()
        } else {
            sample_dirichlet(&vec![alpha; unsel.len()], rng)
        };
        let mut like = 1.0;
        for members in &clusters {
            let (a, b) = (beta_dist.0.sample(rng), beta_dist.1.sample(rng));
            let noise_share = a / (a + b);
            let comp = sample_dirichlet(&vec![alpha; sel.len()], rng);
            let mut p = vec![0.0; d];
            for (k, &j) in unsel.iter().enumerate() {
                p[j] = noise_share * noise_comp[k];
            }
            for (k, &j) in sel.iter().enumerate() {
                p[j] = (1.0 - noise_share) * comp[k];
            }
            for &i in members {
                for j in 0..d {
                    like *= p[j].powi(rows[i][j] as i32);
                }
            }
        }
        values.push(like);
    }
    mean_se(&values)
}

/// Per-node branch counts of every sample, computed by walking the tree.
/// `columns[leaf]` gives the count column of each leaf node.
pub fn branch_counts(tree: &PhyloTree, rows: &[Vec<u32>], columns: &HashMap<usize, usize>) -> Vec<Vec<u32>> {
    fn subtree(tree: &PhyloTree, v: usize, row: &[u32], columns: &HashMap<usize, usize>, out: &mut Vec<u32>) -> u32 {
        let kids = tree.children(v);
        let total = if kids.is_empty() {
            row[columns[&v]]
        } else {
            kids.iter().map(|&k| subtree(tree, k, row, columns, out)).sum()
        };
        out[v] = total;
        total
    }
    rows.iter()
        .map(|row| {
            let mut out = vec![0; tree.n_nodes()];
            subtree(tree, tree.root(), row, columns, &mut out);
            out
        })
        .collect()
}

/// Monte Carlo estimate of the Dirichlet-tree marginal with node selection:
/// selected internal nodes draw branch probabilities per cluster, the others
/// once for all samples. `gamma` is indexed by position in
/// `tree.internal_nodes()`.
pub fn mc_dtm_marginal<R: Rng>(
    tree: &PhyloTree,
    totals: &[Vec<u32>],
    c: &Partition,
    gamma: &Selection,
    alpha: f64,
    draws: usize,
    rng: &mut R,
) -> (f64, f64) {
    let internal = tree.internal_nodes();
    let clusters = c.clusters();
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut like = 1.0;
        for (pos, &v) in internal.iter().enumerate() {
            let kids = tree.children(v);
            let groups: Vec<Vec<usize>> = if gamma.is_selected(pos) {
                clusters.clone()
            } else {
                vec![(0..c.len()).collect()]
            };
            for members in groups {
                let theta = sample_dirichlet(&vec![alpha; kids.len()], rng);
                for &i in &members {
                    for (k, &child) in kids.iter().enumerate() {
                        like *= theta[k].powi(totals[i][child] as i32);
                    }
                }
            }
        }
        values.push(like);
    }
    mean_se(&values)
}

/// Exact posterior over every (partition, nonempty selection) pair, keyed by
/// (canonical labels, bitstring).
pub fn exact_posterior<K: Kernel>(
    kernel: &K,
    log_prior: impl Fn(&Partition) -> f64,
) -> HashMap<(Vec<usize>, String), f64> {
    let w = kernel.inclusion_prior();
    let mut keys = Vec::new();
    let mut logs = Vec::new();
    for c in all_set_partitions(kernel.n_samples()) {
        let lp = log_prior(&c);
        for g in Selection::enumerate_nonempty(kernel.n_features()) {
            let k = g.count() as f64;
            let d = g.len() as f64;
            logs.push(lp + k * w.ln() + (d - k) * (1.0 - w).ln() + kernel.log_marginal(&c, &g));
            keys.push((c.canonical().labels().to_vec(), g.to_bitstring()));
        }
    }
    let z = log_sum_exp(&logs);
    keys.into_iter().zip(logs).map(|(k, l)| (k, (l - z).exp())).collect()
}

pub fn total_variation(exact: &HashMap<(Vec<usize>, String), f64>, counts: &HashMap<(Vec<usize>, String), u64>) -> f64 {
    let m: u64 = counts.values().sum();
    let mut tv = 0.0;
    for (k, &p) in exact {
        let q = counts.get(k).copied().unwrap_or(0) as f64 / m as f64;
        tv += (p - q).abs();
    }
    for (k, &c) in counts {
        if !exact.contains_key(k) {
            tv += c as f64 / m as f64;
        }
    }
    tv / 2.0
}

/// A small random count table with a random partition and selection.
pub struct TinyInstance {
    pub rows: Vec<Vec<u32>>,
    pub partition: Partition,
    pub gamma: Selection,
}

fn random_rows<R: Rng>(n: usize, d: usize, max: u32, rng: &mut R) -> Vec<Vec<u32>> {
    (0..n)
        .map(|_| loop {
            let row: Vec<u32> = (0..d).map(|_| rng.random_range(0..=max)).collect();
            if row.iter().sum::<u32>() > 0 {
                break row;
            }
        })
        .collect()
}

fn random_partition<R: Rng>(n: usize, rng: &mut R) -> Partition {
    let all = all_set_partitions(n);
    all[rng.random_range(0..all.len())].clone()
}

fn random_selection<R: Rng>(d: usize, rng: &mut R) -> Selection {
    let all = Selection::enumerate_nonempty(d);
    all[rng.random_range(0..all.len())].clone()
}

pub fn tiny_dm_instance<R: Rng>(rng: &mut R) -> TinyInstance {
    let n = rng.random_range(2..=3);
    let d = rng.random_range(2..=4);
    TinyInstance {
        rows: random_rows(n, d, 3, rng),
        partition: random_partition(n, rng),
        gamma: random_selection(d, rng),
    }
}

/// Random tree with `d` leaves named `L0..`, internal nodes of arity 2 or 3.
pub fn tiny_tree<R: Rng>(d: usize, rng: &mut R) -> PhyloTree {
    use mfmclust_core::TreeBuilder;
    let mut b = TreeBuilder::new();
    let root = b.add_node(None, None).unwrap();
    // Grow by repeatedly splitting a random open slot.
    let mut open = vec![(root, (0..d).collect::<Vec<usize>>())];
    while let Some((node, leaves)) = open.pop() {
        let arity = if leaves.len() >= 3 && rng.random::<bool>() { 3 } else { 2 };
        let mut parts: Vec<Vec<usize>> = vec![Vec::new(); arity];
        for (k, &leaf) in leaves.iter().enumerate() {
            parts[if k < arity { k } else { rng.random_range(0..arity) }].push(leaf);
        }
        for part in parts {
            if part.len() == 1 {
                b.add_node(Some(node), Some(format!("L{}", part[0]))).unwrap();
            } else {
                let child = b.add_node(Some(node), None).unwrap();
                open.push((child, part));
            }
        }
    }
    b.build().unwrap()
}

pub struct TinyTreeInstance {
    pub tree: PhyloTree,
    pub rows: Vec<Vec<u32>>,
    pub partition: Partition,
    pub gamma: Selection,
}

impl TinyTreeInstance {
    pub fn matrix(&self) -> mfmclust_core::CountMatrix {
        let d = self.rows[0].len();
        mfmclust_core::CountMatrix::new(
            (0..self.rows.len()).map(|i| format!("S{i}")).collect(),
            (0..d).map(|j| format!("L{j}")).collect(),
            self.rows.concat(),
        )
        .unwrap()
    }

    /// Leaf node id to count column.
    pub fn columns(&self) -> HashMap<usize, usize> {
        self.tree
            .leaves()
            .iter()
            .map(|&v| {
                let label = self.tree.node(v).label.as_deref().unwrap();
                (v, label[1..].parse().unwrap())
            })
            .collect()
    }
}

pub fn tiny_dtm_instance<R: Rng>(rng: &mut R) -> TinyTreeInstance {
    let n = rng.random_range(2..=3);
    let d = rng.random_range(3..=4);
    let tree = tiny_tree(d, rng);
    let m = tree.internal_nodes().len();
    TinyTreeInstance {
        rows: random_rows(n, d, 3, rng),
        partition: random_partition(n, rng),
        gamma: random_selection(m, rng),
        tree,
    }
}
