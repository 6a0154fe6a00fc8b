mod oracles;

use mfmclust_core::kernel::dm::log_dm_selected_marginal;
use mfmclust_core::kernel::dtm::log_dtm_selected_marginal;
use mfmclust_core::{
    propagate_tree_counts, CountMatrix, DmHyper, DmKernel, DtmHyper, DtmKernel, Kernel, Partition, PhyloTree,
    Selection,
};
use oracles::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn dm_marginal_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..6 {
        let inst = tiny_dm_instance(&mut rng);
        let m = CountMatrix::from_rows(&inst.rows).unwrap();
        let hyper = DmHyper {
            alpha: 0.7,
            beta1: 1.3,
            beta2: 0.8,
            w: 0.5,
        };
        let exact = log_dm_selected_marginal(&m, &inst.gamma, &inst.partition, hyper)
            .unwrap()
            .exp();
        let (mean, se) = mc_dm_marginal(&inst.rows, &inst.partition, &inst.gamma, 0.7, (1.3, 0.8), 200_000, &mut rng);
        assert!((mean - exact).abs() < 4.0 * se, "exact {exact} mc {mean} ± {se}");
    }
}

#[test]
fn dtm_marginal_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..6 {
        let inst = tiny_dtm_instance(&mut rng);
        let tc = propagate_tree_counts(&inst.matrix(), &inst.tree).unwrap();
        let hyper = DtmHyper { alpha: 1.4, w: 0.5 };
        let exact = log_dtm_selected_marginal(&tc, &inst.tree, &inst.gamma, &inst.partition, hyper)
            .unwrap()
            .exp();
        let totals = branch_counts(&inst.tree, &inst.rows, &inst.columns());
        let (mean, se) = mc_dtm_marginal(&inst.tree, &totals, &inst.partition, &inst.gamma, 1.4, 200_000, &mut rng);
        assert!((mean - exact).abs() < 4.0 * se, "exact {exact} mc {mean} ± {se}");
    }
}

#[test]
fn star_tree_cluster_factor_equals_dm_selected_factor() {
    // With one internal node and every node selected, the DTM cluster factor is
    // the Dirichlet-multinomial factor over the selected OTUs alone.
    let rows = vec![vec![3, 0, 2, 1], vec![0, 4, 1, 1], vec![2, 2, 2, 0]];
    let m = CountMatrix::from_rows(&rows).unwrap();
    let tree = PhyloTree::star(m.feature_names()).unwrap();
    let tc = propagate_tree_counts(&m, &tree).unwrap();
    let dtm = DtmKernel::new(&tc, &tree, DtmHyper::default()).unwrap();
    let dm = DmKernel::new(&m, DmHyper::default()).unwrap();
    let all_dtm = Selection::all(1);
    let all_dm = Selection::all(4);
    for members in [vec![0], vec![1, 2], vec![0, 1, 2]] {
        let a = dtm.log_cluster_factor(&dtm.stats_for(&members, &all_dtm), &all_dtm);
        let b = dm.log_informative_factor(&dm.stats_for(&members, &all_dm), &all_dm);
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

fn arb_rows() -> impl Strategy<Value = Vec<Vec<u32>>> {
    (2usize..6, 2usize..6).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(0u32..6, d), n)
            .prop_filter("positive rows", |rows| rows.iter().all(|r| r.iter().sum::<u32>() > 0))
    })
}

fn arb_labels(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..3, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dm_exchangeable_and_label_invariant(rows in arb_rows(), seed in any::<u64>()) {
        let n = rows.len();
        let d = rows[0].len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        use rand::seq::SliceRandom;
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let mut bits: Vec<bool> = (0..d).map(|_| rng.random()).collect();
        bits[0] = true;
        let gamma = Selection::new(bits).unwrap();
        let m = CountMatrix::from_rows(&rows).unwrap();
        let k = DmKernel::new(&m, DmHyper::default()).unwrap();
        let base = k.log_marginal(&Partition::new(labels.clone()), &gamma);

        let relabeled: Vec<usize> = labels.iter().map(|&l| (l + 1) % 3).collect();
        prop_assert!((k.log_marginal(&Partition::new(relabeled), &gamma) - base).abs() < 1e-9);

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let rows_p: Vec<Vec<u32>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let labels_p: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        let kp = DmKernel::new(&CountMatrix::from_rows(&rows_p).unwrap(), DmHyper::default()).unwrap();
        prop_assert!((kp.log_marginal(&Partition::new(labels_p), &gamma) - base).abs() < 1e-9);
    }

    #[test]
    fn dm_predictive_is_marginal_difference(rows in arb_rows(), labels in arb_labels(6)) {
        let n = rows.len();
        let m = CountMatrix::from_rows(&rows).unwrap();
        let k = DmKernel::new(&m, DmHyper { alpha: 0.5, beta1: 2.0, beta2: 1.5, w: 0.3 }).unwrap();
        let gamma = Selection::from_indices(rows[0].len(), &[0]).unwrap();
        let members: Vec<usize> = (1..n).filter(|&i| labels[i] == 0).collect();
        let stats = k.stats_for(&members, &gamma);
        let mut with = stats.clone();
        k.add_sample(&mut with, 0, &gamma);
        let diff = k.log_cluster_factor(&with, &gamma) - k.log_cluster_factor(&stats, &gamma);
        prop_assert!((k.log_predictive(0, &stats, &gamma) - diff).abs() < 1e-9);
    }

    #[test]
    fn dm_flip_delta_matches_recompute(rows in arb_rows(), labels in arb_labels(6), j in 0usize..6, j2 in 0usize..6) {
        let n = rows.len();
        let d = rows[0].len();
        let (j, j2) = (j % d, j2 % d);
        let m = CountMatrix::from_rows(&rows).unwrap();
        let k = DmKernel::new(&m, DmHyper::default()).unwrap();
        let c = Partition::new(labels[..n].to_vec());
        let gamma = Selection::all(d);
        let flips: Vec<usize> = if j == j2 { vec![j] } else { vec![j, j2] };
        if flips.len() < d {
            let stats: Vec<_> = c.clusters().iter().map(|mm| k.stats_for(mm, &gamma)).collect();
            let delta = k.log_flip_delta(&stats, &gamma, &flips);
            let after = gamma.flipped(&flips);
            let expect = k.log_marginal(&c, &after) - k.log_marginal(&c, &gamma);
            prop_assert!((delta - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn dtm_additive_over_clusters(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = tiny_dtm_instance(&mut rng);
        let tc = propagate_tree_counts(&inst.matrix(), &inst.tree).unwrap();
        let k = DtmKernel::new(&tc, &inst.tree, DtmHyper::default()).unwrap();
        let total = k.log_marginal(&inst.partition, &inst.gamma);
        let parts: f64 = inst.partition.clusters().iter()
            .map(|mm| k.log_cluster_factor(&k.stats_for(mm, &inst.gamma), &inst.gamma))
            .sum();
        prop_assert!((total - parts - k.log_pooled_factor(&inst.gamma)).abs() < 1e-9);
        for flip in 0..inst.gamma.len() {
            if inst.gamma.is_selected(flip) && inst.gamma.count() == 1 {
                continue;
            }
            let stats: Vec<_> = inst.partition.clusters().iter().map(|mm| k.stats_for(mm, &inst.gamma)).collect();
            let delta = k.log_flip_delta(&stats, &inst.gamma, &[flip]);
            let expect = k.log_marginal(&inst.partition, &inst.gamma.flipped(&[flip])) - total;
            prop_assert!((delta - expect).abs() < 1e-9);
        }
    }
}
