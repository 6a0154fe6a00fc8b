//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! stdout (uncaptured) and then asserts.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use mfmclust::commands::{self, SimulateConfig};
use mfmclust::draws::{write_draw, HEADER};
use mfmclust::RunConfig;
use mfmclust_core::kernel::dm::log_dm_selected_marginal;
use mfmclust_core::kernel::dtm::log_dtm_selected_marginal;
use mfmclust_core::partition::all_set_partitions;
use mfmclust_core::posterior::{adjusted_rand, coclustering, roc_auc, selection_frequencies, summarize_partition};
use mfmclust_core::prior::{compute_vn_table, compute_vn_table_with_terms, DEFAULT_VN_TOL};
use mfmclust_core::sampler::{run_chain, Draw};
use mfmclust_core::simgen::{generate_scenario, PresetShape, ScenarioSpec};
use mfmclust_core::{
    propagate_tree_counts, rescale_counts, run_mcmc, CountMatrix, DmHyper, DmKernel, DtmHyper, DtmKernel, Kernel,
    McmcConfig, Partition, PartitionPrior, PhyloTree, PriorSpec, Scale, Selection,
};
use oracles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, title: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n:>2}: {status}  {title}  [{detail}]").unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_prior_normalization() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 3..=6 {
        let parts = all_set_partitions(n);
        for eta in [0.5, 1.0, 2.0] {
            let spec = PriorSpec { eta, ..PriorSpec::default() };
            let prior = PartitionPrior::new(spec, n).unwrap();
            let total: f64 = parts.iter().map(|c| prior.log_partition_prior(c).unwrap().exp()).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "partition prior sums to 1",
        worst <= 1e-8 && secs < 1.0,
        format!("max |sum - 1| = {worst:.2e}, {secs:.3} s"),
    );
}

#[test]
fn criterion_02_vn_truncation() {
    let mut worst: f64 = 0.0;
    for eta in [0.5, 1.0, 2.0] {
        let spec = PriorSpec { eta, ..PriorSpec::default() };
        for n in 1..=100 {
            let t = compute_vn_table(n, &spec, DEFAULT_VN_TOL).unwrap();
            let t2 = compute_vn_table_with_terms(n, &spec, 2 * t.truncation_terms()).unwrap();
            for r in 1..=n {
                worst = worst.max((t.log_vn(r) - t2.log_vn(r)).abs());
            }
        }
    }
    report(2, "V_N stable under doubled truncation", worst <= 1e-10, format!("max change {worst:.2e}"));
}

fn urn_log_prob(spec: &PriorSpec, labels: &[usize]) -> f64 {
    let mut sizes: Vec<usize> = Vec::new();
    let mut total = 0.0;
    for (n, &l) in labels.iter().enumerate() {
        let prior = PartitionPrior::new(spec.clone(), n + 1).unwrap();
        let (existing, new) = prior.log_urn_weights(&sizes);
        let mut all = existing.clone();
        all.push(new);
        let z = log_sum_exp(&all);
        if l < sizes.len() {
            total += existing[l] - z;
            sizes[l] += 1;
        } else {
            total += new - z;
            sizes.push(1);
        }
    }
    total
}

#[test]
fn criterion_03_urn_consistency() {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for spec in [PriorSpec::default(), PriorSpec { eta: 0.5, ..PriorSpec::default() }, PriorSpec::dp(1.0)] {
        for n in 1..=5 {
            let prior = PartitionPrior::new(spec.clone(), n).unwrap();
            for c in all_set_partitions(n) {
                let c = c.canonical();
                worst = worst.max((urn_log_prob(&spec, c.labels()) - prior.log_partition_prior(&c).unwrap()).abs());
                checked += 1;
            }
        }
    }
    report(3, "urn reproduces partition prior", worst <= 1e-10, format!("{checked} partitions, max diff {worst:.2e}"));
}

#[test]
fn criterion_04_exact_posterior_recovery() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<Vec<u32>> = (0..5)
        .map(|_| loop {
            let row: Vec<u32> = (0..3).map(|_| rng.random_range(0..=2)).collect();
            let s: u32 = row.iter().sum();
            if (1..=4).contains(&s) {
                break row;
            }
        })
        .collect();
    let m = CountMatrix::from_rows(&rows).unwrap();
    let kernel = DmKernel::new(&m, DmHyper::default()).unwrap();
    let prior = PartitionPrior::new(PriorSpec::default(), 5).unwrap();
    let exact = exact_posterior(&kernel, |c| mfm_log_prior(&c.sizes(), 1.0, 1.0));
    assert_eq!(exact.len(), 52 * 7);

    let kept = 200_000;
    let config = McmcConfig {
        iterations: 5_000 + kept,
        burn_in: 5_000,
        thinning: 1,
        seed: 4,
        ..McmcConfig::default()
    };
    let mut hist: HashMap<(Vec<usize>, String), u64> = HashMap::new();
    let mut n = 0;
    run_chain(&kernel, &prior, &config, |state, _| {
        let key = (state.partition().labels().to_vec(), state.selection().to_bitstring());
        *hist.entry(key).or_insert(0) += 1;
        n += 1;
    })
    .unwrap();
    assert_eq!(n, kept);
    let tv = total_variation(&exact, &hist);
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "MFMDM chain matches enumeration (N=5, d=3)",
        tv < 0.05 && secs < 300.0,
        format!("rows {rows:?}, TV {tv:.4} over {kept} draws, {secs:.1} s"),
    );
}

#[test]
fn criterion_05_star_tree_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let d = rng.random_range(2..=10);
        let rows: Vec<Vec<u32>> = (0..n)
            .map(|_| loop {
                let row: Vec<u32> = (0..d).map(|_| rng.random_range(0..20)).collect();
                if row.iter().sum::<u32>() > 0 {
                    break row;
                }
            })
            .collect();
        let m = CountMatrix::from_rows(&rows).unwrap();
        let alpha = rng.random_range(0.2..3.0);
        let dm = DmKernel::new(&m, DmHyper { alpha, ..DmHyper::default() }).unwrap();
        let tree = PhyloTree::star(m.feature_names()).unwrap();
        let tc = propagate_tree_counts(&m, &tree).unwrap();
        let dtm = DtmKernel::new(&tc, &tree, DtmHyper { alpha, ..DtmHyper::default() }).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let c = Partition::new(labels);
        let root = Selection::all(1);
        let all = Selection::all(d);
        for members in &c.clusters() {
            let a = dtm.log_cluster_factor(&dtm.stats_for(members, &root), &root);
            let b = dm.log_informative_factor(&dm.stats_for(members, &all), &all);
            worst = worst.max((a - b).abs());
        }
    }
    report(5, "star-tree DTM equals DM cluster factors", worst <= 1e-10, format!("100 states, max diff {worst:.2e}"));
}

#[test]
fn criterion_06_marginal_oracles() {
    let draws = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_z: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..20 {
        let inst = tiny_dm_instance(&mut rng);
        let m = CountMatrix::from_rows(&inst.rows).unwrap();
        let alpha = rng.random_range(0.5..2.0);
        let (b1, b2) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        let hyper = DmHyper { alpha, beta1: b1, beta2: b2, w: 0.5 };
        let exact = log_dm_selected_marginal(&m, &inst.gamma, &inst.partition, hyper).unwrap().exp();
        let (mean, se) = mc_dm_marginal(&inst.rows, &inst.partition, &inst.gamma, alpha, (b1, b2), draws, &mut rng);
        let z = (mean - exact).abs() / se;
        worst_z = worst_z.max(z);
        failures += (z > 3.0) as usize;
    }
    for _ in 0..20 {
        let inst = tiny_dtm_instance(&mut rng);
        let alpha = rng.random_range(0.5..2.0);
        let tc = propagate_tree_counts(&inst.matrix(), &inst.tree).unwrap();
        let hyper = DtmHyper { alpha, w: 0.5 };
        let exact = log_dtm_selected_marginal(&tc, &inst.tree, &inst.gamma, &inst.partition, hyper)
            .unwrap()
            .exp();
        let totals = branch_counts(&inst.tree, &inst.rows, &inst.columns());
        let (mean, se) = mc_dtm_marginal(&inst.tree, &totals, &inst.partition, &inst.gamma, alpha, draws, &mut rng);
        let z = (mean - exact).abs() / se;
        worst_z = worst_z.max(z);
        failures += (z > 3.0) as usize;
    }
    report(
        6,
        "DM and DTM marginals match Monte Carlo",
        failures == 0,
        format!("20 DM + 20 DTM instances, 1e6 draws each, max |z| {worst_z:.2}, {failures} beyond 3 SE"),
    );
}

/// Fits MFMDM with the default schedule to one desk replicate and returns
/// (adjusted Rand vs groups, selection AUC).
fn desk_replicate(scenario: u32, seed: u64) -> (f64, f64) {
    let spec = ScenarioSpec::preset(PresetShape::DESK, scenario, seed).unwrap();
    let data = generate_scenario(&spec).unwrap();
    let (counts, _) = rescale_counts(&data.counts, Scale::Auto).unwrap();
    let kernel = DmKernel::new(&counts, DmHyper::default()).unwrap();
    let prior = PartitionPrior::new(PriorSpec::default(), counts.n_samples()).unwrap();
    let config = McmcConfig { seed, ..McmcConfig::default() };
    let chain = run_mcmc(&kernel, &prior, &config).unwrap();
    let parts: Vec<&Partition> = chain.draws.iter().map(|d| &d.partition).collect();
    let zeta = coclustering(parts.iter().copied()).unwrap();
    let estimate = summarize_partition(parts.iter().copied(), &zeta).unwrap();
    let ari = adjusted_rand(&estimate.partition, &data.group_labels).unwrap();
    let freqs = selection_frequencies(&chain.draws).unwrap();
    let auc = roc_auc(&freqs, &data.informative_truth).unwrap();
    (ari, auc)
}

#[test]
fn criterion_07_recovery_scenario_5() {
    let start = Instant::now();
    let aris: Vec<f64> = (0..20).map(|seed| desk_replicate(5, seed).0).collect();
    let good = aris.iter().filter(|&&a| a >= 0.9).count();
    let secs = start.elapsed().as_secs_f64();
    let shown: Vec<String> = aris.iter().map(|a| format!("{a:.2}")).collect();
    report(
        7,
        "desk scenario 5 recovers the groups",
        good >= 16 && secs < 600.0,
        format!("ARI >= 0.9 in {good}/20, {secs:.0} s, ARI [{}]", shown.join(" ")),
    );
}

#[test]
fn criterion_08_selection_auc_scenario_3() {
    let mut aucs: Vec<f64> = (0..20).map(|seed| desk_replicate(3, seed).1).collect();
    aucs.sort_by(f64::total_cmp);
    let median = (aucs[9] + aucs[10]) / 2.0;
    let shown: Vec<String> = aucs.iter().map(|a| format!("{a:.2}")).collect();
    report(
        8,
        "desk scenario 3 selection AUC",
        median >= 0.8,
        format!("median {median:.3}, sorted [{}]", shown.join(" ")),
    );
}

fn simulate_desk(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("sim");
    commands::simulate(&SimulateConfig { scenario: 5, seed: 9, out: out.clone(), ..SimulateConfig::default() })
        .unwrap();
    out.join("counts.tsv")
}

#[test]
fn criterion_09_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let counts = simulate_desk(tmp.path());
    let mut identical = true;
    let mut bytes = 0;
    for model_tree in [false, true] {
        let runs: Vec<_> = ["a", "b"]
            .iter()
            .map(|name| {
                let mut cfg = RunConfig {
                    counts: Some(counts.clone()),
                    scale: "AUTO".parse().unwrap(),
                    seed: 9,
                    chains: 2,
                    out: tmp.path().join(format!("{name}{model_tree}")),
                    ..RunConfig::default()
                };
                if model_tree {
                    cfg.model = mfmclust::Model::Mfmdtm;
                    cfg.tree = Some(tmp.path().join("sim/tree.nwk"));
                    cfg.iterations = 4_000;
                    cfg.burn_in = 2_000;
                }
                commands::fit(&cfg).unwrap();
                cfg.out
            })
            .collect();
        for chain in 0..2 {
            let f = commands::draws_file_name(chain);
            let a = fs::read(runs[0].join(&f)).unwrap();
            let b = fs::read(runs[1].join(&f)).unwrap();
            bytes += a.len();
            identical &= a == b && !a.is_empty();
        }
    }
    report(
        9,
        "same config and seed give byte-identical draws",
        identical,
        format!("MFMDM and MFMDTM, 2 chains each, {bytes} bytes compared"),
    );
}

#[test]
fn criterion_10_posterior_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    // A run whose draws all share one partition.
    let fixed = Partition::new(vec![0, 0, 1, 2, 1, 0]);
    let run = tmp.path().join("fixed");
    fs::create_dir_all(&run).unwrap();
    let mut text = format!("{HEADER}\n").into_bytes();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for it in 1..=50 {
        let bits: Vec<bool> = (0..4).map(|j| j == 0 || rng.random()).collect();
        let draw = Draw {
            iteration: it,
            partition: fixed.clone(),
            selection: Selection::new(bits).unwrap(),
            log_posterior: -1.5,
        };
        write_draw(&mut text, &draw).unwrap();
    }
    fs::write(run.join("draws_chain0.tsv"), text).unwrap();
    let manifest = serde_json::json!({
        "config": RunConfig::default(),
        "scale_used": 1.0,
        "feature_kind": "otu",
        "samples": ["s1", "s2", "s3", "s4", "s5", "s6"],
        "features": ["f1", "f2", "f3", "f4"],
        "chains": [{"chain": 0, "seed": 0, "draws_file": "draws_chain0.tsv", "n_draws": 50, "acceptance": {}}],
        "wall_time_seconds": 0.0,
        "version": "test",
    });
    fs::write(run.join(commands::MANIFEST), manifest.to_string()).unwrap();
    let fixed_summary = commands::summarize(&run, &run).unwrap();
    let partition_csv = fs::read_to_string(run.join("partition.csv")).unwrap();
    let fixed_ok = fixed_summary.score == 1.0
        && partition_csv == "sample,cluster\ns1,1\ns2,1\ns3,2\ns4,3\ns5,2\ns6,1\n";

    // Real runs of every model.
    let counts = simulate_desk(tmp.path());
    let mut invariants_ok = fixed_summary.zeta_symmetric && fixed_summary.zeta_unit_diagonal;
    let mut runs = 1;
    for model in [mfmclust::Model::Mfmdm, mfmclust::Model::Dpdm, mfmclust::Model::Mfmdtm, mfmclust::Model::Dpdtm] {
        let out = tmp.path().join(model.name());
        let cfg = RunConfig {
            model,
            counts: Some(counts.clone()),
            tree: model.uses_tree().then(|| tmp.path().join("sim/tree.nwk")),
            iterations: 2_000,
            burn_in: 1_000,
            chains: 2,
            out: out.clone(),
            ..RunConfig::default()
        };
        commands::fit(&cfg).unwrap();
        let s = commands::summarize(&out, &out).unwrap();
        invariants_ok &= s.zeta_symmetric && s.zeta_unit_diagonal && s.score <= 1.0;
        runs += 1;
    }
    report(
        10,
        "AR = 1 for a constant chain; zeta invariants on every summarize",
        fixed_ok && invariants_ok,
        format!("constant-chain AR {}, invariants held on {runs} runs", fixed_summary.score),
    );
}
