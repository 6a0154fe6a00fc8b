//! Feature-selection indicator.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Binary inclusion vector over features (OTUs or internal tree nodes).
/// At least one feature is always selected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Selection {
    bits: Vec<bool>,
    count: usize,
}

impl Selection {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        let count = bits.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::InvalidConfig("selection must include at least one feature".into()));
        }
        Ok(Self { bits, count })
    }

    pub fn all(d: usize) -> Self {
        Self {
            bits: alloc::vec![true; d],
            count: d,
        }
    }

    pub fn from_indices(d: usize, selected: &[usize]) -> Result<Self> {
        let mut bits = alloc::vec![false; d];
        for &j in selected {
            *bits.get_mut(j).ok_or(Error::LengthMismatch {
                expected: d,
                found: j + 1,
            })? = true;
        }
        Self::new(bits)
    }

    pub fn parse_bitstring(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidConfig(alloc::format!(
                    "selection bitstring contains `{other}`"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bits)
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of selected features.
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_selected(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    pub fn unselected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| !b).map(|(j, _)| j)
    }

    /// Toggles feature `j`. Callers must not empty the selection.
    pub fn flip(&mut self, j: usize) {
        self.bits[j] = !self.bits[j];
        if self.bits[j] {
            self.count += 1;
        } else {
            self.count -= 1;
        }
        debug_assert!(self.count >= 1, "selection emptied");
    }

    pub fn flipped(&self, flips: &[usize]) -> Selection {
        let mut s = self.clone();
        for &j in flips {
            s.flip(j);
        }
        s
    }

    /// `ln p(γ)` under independent Bernoulli(`w`) inclusion, unnormalized over
    /// the nonempty support.
    pub fn log_prior(&self, w: f64) -> f64 {
        let d = self.bits.len() as f64;
        let k = self.count as f64;
        k * libm::log(w) + (d - k) * libm::log(1.0 - w)
    }

    /// Every nonempty selection over `d` features.
    pub fn enumerate_nonempty(d: usize) -> Vec<Selection> {
        (1u64..(1u64 << d))
            .map(|mask| {
                let bits = (0..d).map(|j| mask >> j & 1 == 1).collect();
                Selection::new(bits).expect("nonempty mask")
            })
            .collect()
    }
}
