//! Log-space numerics.

use alloc::vec::Vec;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln Γ(a + n) - ln Γ(a)`, the log rising factorial.
#[inline]
pub fn ln_rising(a: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        ln_gamma(a + n as f64) - ln_gamma(a)
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(libm::exp(lo - hi))
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| libm::exp(x - max)).sum();
    max + libm::log(s)
}

/// Logistic function of `a - b`, i.e. `e^a / (e^a + e^b)`.
#[inline]
pub fn prob_first(a: f64, b: f64) -> f64 {
    let d = b - a;
    if d > 0.0 {
        let e = libm::exp(-d);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(d))
    }
}

/// Tabulated `ln Γ(k + offset)` for integer `k`.
///
/// Collapsed likelihoods evaluate log-gamma at a fixed hyperparameter plus an
/// integer count, so the hot loops read from a table instead.
#[derive(Debug, Clone)]
pub struct LnGammaTable {
    offset: f64,
    values: Vec<f64>,
}

/// Upper bound on tabulated entries; larger arguments fall back to `lgamma`.
const MAX_TABLE: u64 = 1 << 22;

impl LnGammaTable {
    pub fn new(offset: f64, max_k: u64) -> Self {
        let len = max_k.min(MAX_TABLE) + 1;
        let values = (0..len).map(|k| ln_gamma(offset + k as f64)).collect();
        Self { offset, values }
    }

    #[inline]
    pub fn get(&self, k: u64) -> f64 {
        match self.values.get(k as usize) {
            Some(v) => *v,
            None => ln_gamma(self.offset + k as f64),
        }
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}
