//! Partition priors: the mixture-of-finite-mixtures prior through its
//! `V_N(R)` coefficients, and the Dirichlet-process (Chinese restaurant)
//! variant.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ln, ln_gamma, log_add_exp};
use crate::partition::Partition;

/// Prior on the number of mixture components `M` (support `1, 2, …`).
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentPrior {
    /// `M - 1 ~ Poisson(lambda)`.
    ShiftedPoisson { lambda: f64 },
    /// `M` fixed.
    PointMass(usize),
    /// Explicit probabilities for `M = 1, 2, …, len`.
    Pmf(Vec<f64>),
}

impl Default for ComponentPrior {
    fn default() -> Self {
        ComponentPrior::ShiftedPoisson { lambda: 1.0 }
    }
}

impl ComponentPrior {
    pub fn validate(&self) -> Result<()> {
        match self {
            ComponentPrior::ShiftedPoisson { lambda } if !(*lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidPrior(alloc::format!("Poisson rate must be positive, got {lambda}")))
            }
            ComponentPrior::PointMass(0) => Err(Error::InvalidPrior("point mass at M = 0".into())),
            ComponentPrior::Pmf(p) => {
                if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidPrior("component pmf has a negative entry".into()));
                }
                let total: f64 = p.iter().sum();
                if total == 0.0 {
                    return Err(Error::InvalidPrior("component pmf has zero total mass".into()));
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidPrior(alloc::format!(
                        "component pmf sums to {total}, not 1"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `ln p_M(m)`, `-inf` outside the support.
    pub fn log_pmf(&self, m: usize) -> f64 {
        if m == 0 {
            return f64::NEG_INFINITY;
        }
        match self {
            ComponentPrior::ShiftedPoisson { lambda } => {
                let k = (m - 1) as f64;
                -lambda + k * ln(*lambda) - ln_gamma(k + 1.0)
            }
            ComponentPrior::PointMass(at) => {
                if m == *at {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            ComponentPrior::Pmf(p) => match p.get(m - 1) {
                Some(&x) if x > 0.0 => ln(x),
                _ => f64::NEG_INFINITY,
            },
        }
    }

    /// Largest `m` with positive mass, if finite.
    pub fn support_max(&self) -> Option<usize> {
        match self {
            ComponentPrior::ShiftedPoisson { .. } => None,
            ComponentPrior::PointMass(at) => Some(*at),
            ComponentPrior::Pmf(p) => p.iter().rposition(|&x| x > 0.0).map(|i| i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorVariant {
    Mfm,
    Dp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    /// Symmetric Dirichlet weight on component proportions.
    pub eta: f64,
    pub components: ComponentPrior,
    pub variant: PriorVariant,
    /// Concentration of the Dirichlet-process variant.
    pub dp_concentration: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            eta: 1.0,
            components: ComponentPrior::default(),
            variant: PriorVariant::Mfm,
            dp_concentration: 1.0,
        }
    }
}

impl PriorSpec {
    pub fn dp(concentration: f64) -> Self {
        Self {
            variant: PriorVariant::Dp,
            dp_concentration: concentration,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidPrior(alloc::format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.dp_concentration > 0.0 && self.dp_concentration.is_finite()) {
            return Err(Error::InvalidPrior(alloc::format!(
                "dp_concentration must be positive, got {}",
                self.dp_concentration
            )));
        }
        self.components.validate()
    }
}

/// Default relative truncation tolerance for the `V_N` series.
pub const DEFAULT_VN_TOL: f64 = 1e-16;
/// Terms that must follow the largest summand before truncating.
const MIN_TERMS_PAST_MODE: usize = 10;
const MAX_SERIES_TERMS: usize = 1 << 20;

/// `ln V_N(R)` for `R = 1..=N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VnTable {
    n: usize,
    log_vn: Vec<f64>,
    truncation_terms: usize,
    tolerance: f64,
}

impl VnTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `ln V_N(r)`; `r` in `1..=N+1`.
    pub fn log_vn(&self, r: usize) -> f64 {
        self.log_vn[r - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.log_vn
    }

    /// Largest number of series terms used for any entry.
    pub fn truncation_terms(&self) -> usize {
        self.truncation_terms
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

fn vn_term(n: usize, r: usize, m: usize, spec: &PriorSpec) -> f64 {
    let lp = spec.components.log_pmf(m);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    let em = spec.eta * m as f64;
    ln_gamma(m as f64 + 1.0) - ln_gamma((m - r) as f64 + 1.0) + ln_gamma(em) - ln_gamma(em + n as f64) + lp
}

enum Truncation {
    Relative(f64),
    Terms(usize),
}

fn vn_series(n: usize, r: usize, spec: &PriorSpec, rule: &Truncation) -> (f64, usize) {
    let last = spec.components.support_max();
    let mut sum = f64::NEG_INFINITY;
    let mut best = f64::NEG_INFINITY;
    let mut mode = r;
    let mut used = 0;
    for m in r.. {
        if last.is_some_and(|l| m > l) {
            break;
        }
        let t = vn_term(n, r, m, spec);
        sum = log_add_exp(sum, t);
        used += 1;
        if t > best {
            best = t;
            mode = m;
        }
        let done = match rule {
            Truncation::Terms(k) => used >= *k,
            Truncation::Relative(tol) => {
                (m >= mode + MIN_TERMS_PAST_MODE && t < sum + ln(*tol)) || used >= MAX_SERIES_TERMS
            }
        };
        if done {
            break;
        }
    }
    (sum, used)
}

/// Builds the `V_N` table, truncating each series once a term falls below
/// `tol` times the running sum and at least ten terms follow the largest one.
pub fn compute_vn_table(n: usize, spec: &PriorSpec, tol: f64) -> Result<VnTable> {
    if n == 0 {
        return Err(Error::InvalidPrior("V_N needs N >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidPrior("truncation tolerance must be positive".into()));
    }
    spec.validate()?;
    let mut log_vn = Vec::with_capacity(n + 1);
    let mut max_terms = 0;
    for r in 1..=n + 1 {
        let (v, used) = vn_series(n, r, spec, &Truncation::Relative(tol));
        max_terms = max_terms.max(used);
        log_vn.push(v);
    }
    Ok(VnTable {
        n,
        log_vn,
        truncation_terms: max_terms,
        tolerance: tol,
    })
}

/// Builds the `V_N` table summing exactly `terms` series terms per entry
/// (fewer when the component prior has finite support).
pub fn compute_vn_table_with_terms(n: usize, spec: &PriorSpec, terms: usize) -> Result<VnTable> {
    if n == 0 || terms == 0 {
        return Err(Error::InvalidPrior("V_N needs N >= 1 and at least one term".into()));
    }
    spec.validate()?;
    let log_vn = (1..=n + 1)
        .map(|r| vn_series(n, r, spec, &Truncation::Terms(terms)).0)
        .collect();
    Ok(VnTable {
        n,
        log_vn,
        truncation_terms: terms,
        tolerance: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMove {
    Split,
    Merge,
}

/// A prior specification bound to a sample size.
#[derive(Debug, Clone)]
pub struct PartitionPrior {
    spec: PriorSpec,
    n: usize,
    table: Option<VnTable>,
    ln_gamma_eta: f64,
}

impl PartitionPrior {
    pub fn new(spec: PriorSpec, n: usize) -> Result<Self> {
        spec.validate()?;
        let table = match spec.variant {
            PriorVariant::Mfm => Some(compute_vn_table(n, &spec, DEFAULT_VN_TOL)?),
            PriorVariant::Dp => None,
        };
        Ok(Self {
            ln_gamma_eta: ln_gamma(spec.eta),
            spec,
            n,
            table,
        })
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> Option<&VnTable> {
        self.table.as_ref()
    }

    fn log_vn(&self, r: usize) -> f64 {
        self.table.as_ref().expect("MFM prior has a V_N table").log_vn(r)
    }

    /// `ln P(c)` from cluster sizes.
    pub fn log_prior_sizes(&self, sizes: &[usize]) -> Result<f64> {
        if sizes.contains(&0) {
            return Err(Error::EmptyCluster);
        }
        let total: usize = sizes.iter().sum();
        if total != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: total,
            });
        }
        let k = sizes.len();
        Ok(match self.spec.variant {
            PriorVariant::Mfm => {
                let eta = self.spec.eta;
                self.log_vn(k)
                    + sizes
                        .iter()
                        .map(|&s| ln_gamma(s as f64 + eta) - self.ln_gamma_eta)
                        .sum::<f64>()
            }
            PriorVariant::Dp => {
                let theta = self.spec.dp_concentration;
                k as f64 * ln(theta)
                    + sizes.iter().map(|&s| ln_gamma(s as f64)).sum::<f64>()
                    + ln_gamma(theta)
                    - ln_gamma(theta + self.n as f64)
            }
        })
    }

    pub fn log_partition_prior(&self, c: &Partition) -> Result<f64> {
        self.log_prior_sizes(&c.sizes())
    }

    /// `ln [P(c') / P(c)]` for splitting a cluster into parts of sizes `n1`
    /// and `n2`, or merging two clusters of those sizes. `n_clusters_before`
    /// counts clusters in `c`.
    pub fn log_pair_ratio(&self, mv: PairMove, n1: usize, n2: usize, n_clusters_before: usize) -> Result<f64> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::EmptyCluster);
        }
        let k = n_clusters_before;
        match mv {
            PairMove::Split if k + 1 > self.n => {
                return Err(Error::InvalidPrior(alloc::format!(
                    "cannot split into {} clusters with N = {}",
                    k + 1,
                    self.n
                )))
            }
            PairMove::Merge if k < 2 => {
                return Err(Error::InvalidPrior("merge needs at least two clusters".into()))
            }
            _ => {}
        }
        let (a, b) = (n1 as f64, n2 as f64);
        let split = match self.spec.variant {
            PriorVariant::Mfm => {
                let eta = self.spec.eta;
                ln_gamma(a + eta) + ln_gamma(b + eta) - ln_gamma(a + b + eta) - self.ln_gamma_eta
            }
            PriorVariant::Dp => ln(self.spec.dp_concentration) + ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b),
        };
        Ok(match (mv, self.spec.variant) {
            (PairMove::Split, PriorVariant::Mfm) => vn_ratio(self.log_vn(k + 1), self.log_vn(k)) + split,
            (PairMove::Merge, PriorVariant::Mfm) => vn_ratio(self.log_vn(k - 1), self.log_vn(k)) - split,
            (PairMove::Split, PriorVariant::Dp) => split,
            (PairMove::Merge, PriorVariant::Dp) => -split,
        })
    }

    /// Unnormalized log weights for placing one more item given the sizes of
    /// the clusters formed by the others: one weight per existing cluster,
    /// then the new-cluster weight. The prior must be bound to
    /// `N = sizes.sum() + 1`.
    pub fn log_urn_weights(&self, sizes: &[usize]) -> (Vec<f64>, f64) {
        let k = sizes.len();
        match self.spec.variant {
            PriorVariant::Mfm => {
                let eta = self.spec.eta;
                let existing = sizes.iter().map(|&s| ln(s as f64 + eta)).collect();
                let new = if k == 0 {
                    0.0
                } else {
                    vn_ratio(self.log_vn(k + 1), self.log_vn(k)) + ln(eta)
                };
                (existing, new)
            }
            PriorVariant::Dp => (
                sizes.iter().map(|&s| ln(s as f64)).collect(),
                ln(self.spec.dp_concentration),
            ),
        }
    }
}

fn vn_ratio(num: f64, den: f64) -> f64 {
    if num == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        num - den
    }
}
