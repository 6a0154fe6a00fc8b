//! Count tables and rescaling.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Samples × features matrix of nonnegative integer counts, stored row-major.
///
/// Every row has a positive total and all names are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    n_samples: usize,
    n_features: usize,
    counts: Vec<u32>,
    sample_names: Vec<String>,
    feature_names: Vec<String>,
}

fn check_unique(kind: &'static str, names: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateName {
                kind,
                name: name.clone(),
            });
        }
    }
    Ok(())
}

impl CountMatrix {
    pub fn new(
        sample_names: Vec<String>,
        feature_names: Vec<String>,
        counts: Vec<u32>,
    ) -> Result<Self> {
        let n_samples = sample_names.len();
        let n_features = feature_names.len();
        if n_samples == 0 || n_features == 0 {
            return Err(Error::Shape(alloc::format!(
                "count table needs at least one sample and one feature (got {n_samples}×{n_features})"
            )));
        }
        if counts.len() != n_samples * n_features {
            return Err(Error::LengthMismatch {
                expected: n_samples * n_features,
                found: counts.len(),
            });
        }
        check_unique("sample", &sample_names)?;
        check_unique("feature", &feature_names)?;
        let m = Self {
            n_samples,
            n_features,
            counts,
            sample_names,
            feature_names,
        };
        for i in 0..n_samples {
            if m.row_sum(i) == 0 {
                return Err(Error::ZeroSumRow {
                    sample: m.sample_names[i].clone(),
                });
            }
        }
        Ok(m)
    }

    /// Builds a matrix with generated names `S1..`, `F1..`.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let samples = (1..=n).map(|i| alloc::format!("S{i}")).collect();
        let features = (1..=d).map(|j| alloc::format!("F{j}")).collect();
        Self::new(samples, features, rows.concat())
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.n_features + j]
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.row(i).iter().map(|&y| y as u64).sum()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = alloc::vec![0u64; self.n_features];
        for i in 0..self.n_samples {
            for (s, &y) in sums.iter_mut().zip(self.row(i)) {
                *s += y as u64;
            }
        }
        sums
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&y| y as u64).sum()
    }

    pub fn sample_names(&self) -> &[String] {
        &self.sample_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }
}

/// Divisor applied to counts before fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    Factor(f64),
    /// Largest sample depth divided by 300, never below 1.
    Auto,
}

impl Default for Scale {
    fn default() -> Self {
        Scale::Factor(50.0)
    }
}

/// Depth that `Scale::Auto` maps to a factor of one.
pub const AUTO_TARGET_DEPTH: f64 = 300.0;

impl Scale {
    pub fn resolve(self, m: &CountMatrix) -> f64 {
        match self {
            Scale::Factor(s) => s,
            Scale::Auto => {
                let max_depth = (0..m.n_samples()).map(|i| m.row_sum(i)).max().unwrap_or(0);
                (max_depth as f64 / AUTO_TARGET_DEPTH).max(1.0)
            }
        }
    }
}

/// Divides every count by the resolved scale, rounding half up.
///
/// Returns the rescaled matrix and the factor used.
pub fn rescale_counts(m: &CountMatrix, scale: Scale) -> Result<(CountMatrix, f64)> {
    let factor = scale.resolve(m);
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!(
            "scale must be a positive finite number, got {factor}"
        )));
    }
    if factor == 1.0 {
        return Ok((m.clone(), 1.0));
    }
    let counts: Vec<u32> = m
        .counts
        .iter()
        .map(|&y| libm::floor(y as f64 / factor + 0.5) as u32)
        .collect();
    for i in 0..m.n_samples {
        let row = &counts[i * m.n_features..(i + 1) * m.n_features];
        if row.iter().all(|&y| y == 0) {
            return Err(Error::RescaledZeroRow {
                sample: m.sample_names[i].clone(),
                scale: factor,
            });
        }
    }
    let out = CountMatrix {
        counts,
        ..m.clone()
    };
    Ok((out, factor))
}
