//! Synthetic two-group count tables with known clusters and known
//! discriminating features.
//!
//! Two disjoint OTU subsets Ψ and Λ are fixed on a long-tail base profile.
//! Group A moves a fraction `separation` of every Ψ OTU's mass onto Λ, group B
//! moves the same fraction of every Λ OTU's mass onto Ψ. Each sample draws a
//! probability vector from a Dirichlet centered on its group mean and then a
//! multinomial of fixed depth.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma};

use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::tree::{PhyloTree, TreeBuilder};

/// Marginal abundance above which a differing OTU counts as informative.
pub const HIGH_ABUNDANCE: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Fraction of each donor OTU's mass that is moved, in `[0, 1]`.
    pub separation: f64,
    pub base_profile: Vec<f64>,
    pub psi: Vec<usize>,
    pub lambda: Vec<usize>,
    pub n_per_group: usize,
    pub depth: u32,
    pub concentration_sum: f64,
    pub seed: u64,
}

/// Shapes of the shipped presets before a scenario index is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetShape {
    pub n_otus: usize,
    pub n_psi: usize,
    pub n_lambda: usize,
    pub psi_share: f64,
    pub lambda_share: f64,
    pub n_per_group: usize,
    pub depth: u32,
    pub concentration_sum: f64,
    /// Exponent of the Zipf base profile.
    pub zipf_exponent: f64,
}

impl PresetShape {
    /// Full-size two-group layout.
    pub const FULL: PresetShape = PresetShape {
        n_otus: 2803,
        n_psi: 356,
        n_lambda: 595,
        psi_share: 0.13,
        lambda_share: 0.15,
        n_per_group: 15,
        depth: 15_000,
        concentration_sum: 200.0,
        zipf_exponent: 1.0,
    };

    /// Same mass shares and subset fractions at d = 200. The steeper Zipf
    /// tail keeps most OTUs below the high-abundance cutoff, as at full size.
    pub const DESK: PresetShape = PresetShape {
        n_otus: 200,
        n_psi: 25,
        n_lambda: 42,
        psi_share: 0.13,
        lambda_share: 0.15,
        n_per_group: 8,
        depth: 1500,
        concentration_sum: 200.0,
        zipf_exponent: 1.5,
    };
}

/// Seed used to place Ψ and Λ on the base profile; fixed so a preset is the
/// same table layout for every replicate.
const LAYOUT_SEED: u64 = 0x05ee_d0f5_ca1e;

/// Zipf profile `p_i ∝ i^(-s)` over `d` features.
pub fn zipf_profile(d: usize, s: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=d).map(|i| libm::pow(i as f64, -s)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

impl ScenarioSpec {
    /// Scenario `z` in `1..=5` (separation `z / 5`) on a preset layout.
    pub fn preset(shape: PresetShape, z: u32, seed: u64) -> Result<Self> {
        if !(1..=5).contains(&z) {
            return Err(Error::Scenario(format!("scenario index must be in 1..=5, got {z}")));
        }
        Self::preset_with_separation(shape, z as f64 / 5.0, seed)
    }

    pub fn preset_with_separation(shape: PresetShape, separation: f64, seed: u64) -> Result<Self> {
        Self::from_profile(shape, zipf_profile(shape.n_otus, shape.zipf_exponent), separation, seed)
    }

    /// Lays Ψ and Λ over a supplied base profile. The subset sizes follow the
    /// shape's fractions of `d`; masses inside Ψ, Λ and the rest are rescaled
    /// so the three blocks carry the shape's shares.
    pub fn from_profile(shape: PresetShape, profile: Vec<f64>, separation: f64, seed: u64) -> Result<Self> {
        let d = profile.len();
        let scaled = |k: usize| (libm::round(k as f64 * d as f64 / shape.n_otus as f64) as usize).max(1);
        let (n_psi, n_lambda) = if d == shape.n_otus {
            (shape.n_psi, shape.n_lambda)
        } else {
            (scaled(shape.n_psi), scaled(shape.n_lambda))
        };
        if n_psi + n_lambda >= d {
            return Err(Error::Scenario("Ψ and Λ must leave other OTUs".into()));
        }
        if profile.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::Scenario("base profile entries must be positive".into()));
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(LAYOUT_SEED));
        let mut psi = order[..n_psi].to_vec();
        let mut lambda = order[n_psi..n_psi + n_lambda].to_vec();
        psi.sort_unstable();
        lambda.sort_unstable();

        let mut block = vec![2u8; d];
        for &j in &psi {
            block[j] = 0;
        }
        for &j in &lambda {
            block[j] = 1;
        }
        let shares = [shape.psi_share, shape.lambda_share, 1.0 - shape.psi_share - shape.lambda_share];
        let mut mass = [0.0; 3];
        for j in 0..d {
            mass[block[j] as usize] += profile[j];
        }
        let mut base_profile: Vec<f64> = (0..d)
            .map(|j| {
                let b = block[j] as usize;
                profile[j] * shares[b] / mass[b]
            })
            .collect();
        let total: f64 = base_profile.iter().sum();
        base_profile.iter_mut().for_each(|p| *p /= total);
        let spec = Self {
            separation,
            base_profile,
            psi,
            lambda,
            n_per_group: shape.n_per_group,
            depth: shape.depth,
            concentration_sum: shape.concentration_sum,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_otus(&self) -> usize {
        self.base_profile.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.base_profile.len();
        if !(0.0..=1.0).contains(&self.separation) {
            return Err(Error::Scenario(format!("separation {} outside [0, 1]", self.separation)));
        }
        if self.base_profile.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Scenario("base profile has negative or non-finite entries".into()));
        }
        let total: f64 = self.base_profile.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Scenario(format!("base profile sums to {total}")));
        }
        let mut seen = vec![0u8; d];
        for (set, tag) in [(&self.psi, 1u8), (&self.lambda, 2u8)] {
            for &j in set.iter() {
                if j >= d {
                    return Err(Error::Scenario(format!("OTU index {j} out of range")));
                }
                if seen[j] != 0 {
                    return Err(Error::Scenario(format!("OTU {j} listed twice in Ψ ∪ Λ")));
                }
                seen[j] = tag;
            }
        }
        let mass = |set: &[usize]| set.iter().map(|&j| self.base_profile[j]).sum::<f64>();
        if self.separation > 0.0 && (mass(&self.psi) <= 0.0 || mass(&self.lambda) <= 0.0) {
            return Err(Error::Scenario("Ψ and Λ need positive base mass".into()));
        }
        if self.n_per_group == 0 || self.depth == 0 {
            return Err(Error::Scenario("groups and depth must be positive".into()));
        }
        if !(self.concentration_sum > 0.0) {
            return Err(Error::Scenario("concentration sum must be positive".into()));
        }
        Ok(())
    }

    /// Expected proportions for group A (`[0]`) and group B (`[1]`).
    pub fn group_means(&self) -> Result<[Vec<f64>; 2]> {
        self.validate()?;
        Ok([
            shift_mass(&self.base_profile, &self.psi, &self.lambda, self.separation)?,
            shift_mass(&self.base_profile, &self.lambda, &self.psi, self.separation)?,
        ])
    }
}

fn shift_mass(base: &[f64], from: &[usize], to: &[usize], s: f64) -> Result<Vec<f64>> {
    let mut mean = base.to_vec();
    if s == 0.0 {
        return Ok(mean);
    }
    let moved: f64 = from.iter().map(|&j| s * base[j]).sum();
    let receiver_mass: f64 = to.iter().map(|&j| base[j]).sum();
    for &j in from {
        mean[j] = base[j] * (1.0 - s);
    }
    for &j in to {
        mean[j] = base[j] + moved * base[j] / receiver_mass;
    }
    if mean.iter().any(|&p| p < 0.0) {
        return Err(Error::Scenario("mass transfer produced a negative proportion".into()));
    }
    Ok(mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub counts: CountMatrix,
    pub group_labels: Partition,
    /// OTUs whose group means differ and whose base abundance exceeds
    /// [`HIGH_ABUNDANCE`].
    pub informative_truth: Vec<bool>,
    pub group_means: [Vec<f64>; 2],
}

/// Dirichlet(`concentration_sum · mean`) then Multinomial(`depth`).
pub fn sample_dirichlet_multinomial<R: Rng + ?Sized>(mean: &[f64], concentration_sum: f64, depth: u32, rng: &mut R) -> Vec<u32> {
    let mut theta: Vec<f64> = mean
        .iter()
        .map(|&m| {
            if m > 0.0 {
                Gamma::new(concentration_sum * m, 1.0).expect("positive shape").sample(rng)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = theta.iter().sum();
    if total > 0.0 {
        theta.iter_mut().for_each(|t| *t /= total);
    } else {
        // Every gamma draw underflowed; fall back to the mean itself.
        theta.copy_from_slice(mean);
    }
    sample_multinomial(&theta, depth, rng)
}

/// Multinomial counts by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(p: &[f64], depth: u32, rng: &mut R) -> Vec<u32> {
    let mut out = vec![0u32; p.len()];
    let mut left = depth as u64;
    let mut mass_left: f64 = p.iter().sum();
    let last = p.iter().rposition(|&x| x > 0.0);
    for (j, &pj) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if pj <= 0.0 {
            continue;
        }
        if Some(j) == last {
            out[j] = left as u32;
            break;
        }
        let q = (pj / mass_left).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("valid binomial").sample(rng);
        out[j] = k as u32;
        left -= k;
        mass_left -= pj;
    }
    out
}

/// Draws the labeled dataset for `spec`, seeded from `spec.seed`.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<LabeledDataset> {
    let means = spec.group_means()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.n_otus();
    let n = 2 * spec.n_per_group;
    let mut counts = Vec::with_capacity(n * d);
    let mut names = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (g, tag) in ["A", "B"].iter().enumerate() {
        for k in 1..=spec.n_per_group {
            counts.extend(sample_dirichlet_multinomial(&means[g], spec.concentration_sum, spec.depth, &mut rng));
            names.push(format!("{tag}{k}"));
            labels.push(g);
        }
    }
    let otus: Vec<String> = (1..=d).map(|j| format!("OTU{j}")).collect();
    let counts = CountMatrix::new(names, otus, counts)?;
    let informative_truth = (0..d)
        .map(|j| means[0][j] != means[1][j] && spec.base_profile[j] > HIGH_ABUNDANCE)
        .collect();
    Ok(LabeledDataset {
        counts,
        group_labels: Partition::new(labels),
        informative_truth,
        group_means: means,
    })
}

/// Uniformly shuffled leaves split recursively at uniform positions.
pub fn random_binary_tree<S: AsRef<str>, R: Rng + ?Sized>(labels: &[S], rng: &mut R) -> Result<PhyloTree> {
    if labels.len() < 2 {
        return Err(Error::Tree("a tree needs at least two leaves".into()));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(rng);
    let mut builder = TreeBuilder::new();
    let root = builder.add_node(None, None)?;
    let mut stack = vec![(root, 0usize, order.len())];
    while let Some((node, lo, hi)) = stack.pop() {
        let cut = rng.random_range(lo + 1..hi);
        for (a, b) in [(lo, cut), (cut, hi)] {
            if b - a == 1 {
                builder.add_node(Some(node), Some(String::from(labels[order[a]].as_ref())))?;
            } else {
                let child = builder.add_node(Some(node), None)?;
                stack.push((child, a, b));
            }
        }
    }
    builder.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_shift_zeroes_donors() {
        let spec = ScenarioSpec::preset(PresetShape::DESK, 5, 1).unwrap();
        let [a, b] = spec.group_means().unwrap();
        assert!(spec.psi.iter().all(|&j| a[j] == 0.0));
        assert!(spec.lambda.iter().all(|&j| b[j] == 0.0));
        for m in [&a, &b] {
            assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_shift_means_equal_base() {
        let spec = ScenarioSpec::preset_with_separation(PresetShape::DESK, 0.0, 1).unwrap();
        let data = generate_scenario(&spec).unwrap();
        assert_eq!(data.group_means[0], spec.base_profile);
        assert_eq!(data.group_means[1], spec.base_profile);
        assert!(data.informative_truth.iter().all(|&t| !t));
    }

    #[test]
    fn preset_shares() {
        let spec = ScenarioSpec::preset(PresetShape::DESK, 3, 0).unwrap();
        let share = |s: &[usize]| s.iter().map(|&j| spec.base_profile[j]).sum::<f64>();
        assert!((share(&spec.psi) - 0.13).abs() < 1e-12);
        assert!((share(&spec.lambda) - 0.15).abs() < 1e-12);
        assert!(ScenarioSpec::preset(PresetShape::DESK, 6, 0).is_err());
    }

    #[test]
    fn rows_sum_to_depth() {
        let spec = ScenarioSpec::preset(PresetShape::DESK, 2, 9).unwrap();
        let data = generate_scenario(&spec).unwrap();
        for i in 0..data.counts.n_samples() {
            assert_eq!(data.counts.row_sum(i), 1500);
        }
        assert_eq!(data, generate_scenario(&spec).unwrap());
    }

    #[test]
    fn degenerate_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_dirichlet_multinomial(&[1.0, 0.0, 0.0], 200.0, 50, &mut rng), vec![50, 0, 0]);
        let c = sample_dirichlet_multinomial(&[0.0, 0.5, 0.0, 0.5], 200.0, 50, &mut rng);
        assert_eq!(c[0] + c[2], 0);
        assert_eq!(c[1] + c[3], 50);
    }

    #[test]
    fn random_tree_has_all_leaves() {
        let labels: Vec<String> = (0..9).map(|i| format!("L{i}")).collect();
        let tree = random_binary_tree(&labels, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(tree.leaves().len(), 9);
        assert_eq!(tree.internal_nodes().len(), 8);
        assert!(tree.internal_nodes().iter().all(|&v| tree.children(v).len() == 2));
    }
}
