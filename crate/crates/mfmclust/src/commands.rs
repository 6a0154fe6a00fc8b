//! The four subcommands as library functions.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mfmclust_core::posterior::{adjusted_rand, ar_against_zeta, roc_auc, DrawAccumulator};
use mfmclust_core::sampler::{run_chain, AcceptStats, Draw};
use mfmclust_core::simgen::{generate_scenario, random_binary_tree, PresetShape, ScenarioSpec};
use mfmclust_core::{
    propagate_tree_counts, rescale_counts, DmKernel, DtmKernel, Kernel, Partition, PartitionPrior, PhyloTree,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::draws::{read_draws, write_draw, HEADER};
use crate::error::{CliError, CliResult};
use crate::newick::{parse_newick, write_newick};
use crate::output::Outputs;
use crate::table::{parse_count_table, parse_two_column_csv, write_count_table};

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 200 OTUs, 8 samples per group, depth 1500.
    Desk,
    /// 2803 OTUs, 15 samples per group, depth 15000.
    Full,
}

impl Preset {
    pub fn shape(self) -> PresetShape {
        match self {
            Preset::Desk => PresetShape::DESK,
            Preset::Full => PresetShape::FULL,
        }
    }
}

fn d_preset() -> Preset {
    Preset::Desk
}
fn d_scenario() -> u32 {
    5
}
fn d_sim_out() -> PathBuf {
    PathBuf::from("sim")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "d_preset")]
    pub preset: Preset,
    /// Scenario index 1..=5; separation is `scenario / 5`.
    #[serde(default = "d_scenario")]
    pub scenario: u32,
    /// Overrides the scenario's separation, in `[0, 1]`.
    #[serde(default)]
    pub separation: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// One positive abundance per line, replacing the Zipf profile.
    #[serde(default)]
    pub base_profile: Option<PathBuf>,
    #[serde(default)]
    pub n_per_group: Option<usize>,
    #[serde(default)]
    pub depth: Option<u32>,
    #[serde(default)]
    pub concentration_sum: Option<f64>,
    #[serde(default = "d_sim_out")]
    pub out: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn read_profile(path: &Path) -> CliResult<Vec<f64>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CliError::input(path, format!("line {}: not a number: {line:?}", k + 1)))?;
        out.push(v);
    }
    let total: f64 = out.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(CliError::input(path, "profile has no positive mass"));
    }
    Ok(out.into_iter().map(|v| v / total).collect())
}

pub fn scenario_spec(cfg: &SimulateConfig) -> CliResult<ScenarioSpec> {
    if !(1..=5).contains(&cfg.scenario) {
        return Err(CliError::Config(format!("`scenario` must be in 1..=5, got {}", cfg.scenario)));
    }
    let mut shape = cfg.preset.shape();
    if let Some(n) = cfg.n_per_group {
        shape.n_per_group = n;
    }
    if let Some(d) = cfg.depth {
        shape.depth = d;
    }
    if let Some(a) = cfg.concentration_sum {
        shape.concentration_sum = a;
    }
    let separation = cfg.separation.unwrap_or(cfg.scenario as f64 / 5.0);
    let spec = match &cfg.base_profile {
        Some(p) => ScenarioSpec::from_profile(shape, read_profile(p)?, separation, cfg.seed)?,
        None => ScenarioSpec::preset_with_separation(shape, separation, cfg.seed)?,
    };
    Ok(spec)
}

/// Writes `counts.tsv`, `labels.csv`, `truth.csv`, `tree.nwk` and
/// `scenario.json` into `cfg.out`.
pub fn simulate(cfg: &SimulateConfig) -> CliResult<Vec<PathBuf>> {
    let spec = scenario_spec(cfg)?;
    let data = generate_scenario(&spec)?;
    let mut out = Outputs::new(&cfg.out)?;
    let mut files = vec![out.write("counts.tsv", write_count_table(&data.counts))?];

    let mut labels = String::from("sample,group\n");
    for (name, &g) in data.counts.sample_names().iter().zip(data.group_labels.labels()) {
        writeln!(labels, "{name},{}", ["A", "B"][g]).unwrap();
    }
    files.push(out.write("labels.csv", labels)?);

    let mut truth = String::from("feature,informative\n");
    for (name, &t) in data.counts.feature_names().iter().zip(&data.informative_truth) {
        writeln!(truth, "{name},{}", t as u8).unwrap();
    }
    files.push(out.write("truth.csv", truth)?);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tree = random_binary_tree(data.counts.feature_names(), &mut rng)?;
    files.push(out.write("tree.nwk", write_newick(&tree) + "\n")?);

    let echo = json!({
        "config": cfg,
        "separation": spec.separation,
        "n_otus": spec.n_otus(),
        "psi": spec.psi,
        "lambda": spec.lambda,
        "n_informative": data.informative_truth.iter().filter(|&&t| t).count(),
    });
    files.push(out.write("scenario.json", serde_json::to_string_pretty(&echo).unwrap() + "\n")?);
    out.commit();
    Ok(files)
}

// --------------------------------------------------------------------- fit

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: usize,
    pub seed: u64,
    pub draws_file: String,
    pub n_draws: usize,
    pub acceptance: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub scale_used: f64,
    pub feature_kind: String,
    pub samples: Vec<String>,
    pub features: Vec<String>,
    pub chains: Vec<ChainReport>,
    pub wall_time_seconds: f64,
    pub version: String,
}

pub const MANIFEST: &str = "manifest.json";

fn acceptance_json(stats: &AcceptStats) -> Value {
    let mut map = serde_json::Map::new();
    for (name, s) in stats.named() {
        map.insert(
            name.into(),
            json!({ "proposed": s.proposed, "accepted": s.accepted, "rate": s.rate() }),
        );
    }
    Value::Object(map)
}

pub fn draws_file_name(chain: usize) -> String {
    format!("draws_chain{chain}.tsv")
}

fn run_chains<K: Kernel + Sync>(
    kernel: &K,
    prior: &PartitionPrior,
    cfg: &RunConfig,
    out: &mut Outputs,
) -> CliResult<Vec<ChainReport>>
where
    K::Stats: Send,
{
    let mut writers = Vec::new();
    for k in 0..cfg.chains {
        writers.push(out.create(&draws_file_name(k))?);
    }
    let results: Vec<CliResult<ChainReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = writers
            .into_iter()
            .enumerate()
            .map(|(k, (path, mut w))| {
                scope.spawn(move || -> CliResult<ChainReport> {
                    let mcmc = cfg.mcmc(k);
                    writeln!(w, "{HEADER}").map_err(|e| CliError::io(&path, e))?;
                    let mut io_err = None;
                    let mut n_draws = 0;
                    let stats = run_chain(kernel, prior, &mcmc, |state, iteration| {
                        if io_err.is_none() {
                            let draw: Draw = state.snapshot(kernel, prior, iteration);
                            if let Err(e) = write_draw(&mut w, &draw) {
                                io_err = Some(e);
                            }
                            n_draws += 1;
                        }
                    })?;
                    if let Some(e) = io_err {
                        return Err(CliError::io(&path, e));
                    }
                    w.flush().map_err(|e| CliError::io(&path, e))?;
                    Ok(ChainReport {
                        chain: k,
                        seed: mcmc.seed,
                        draws_file: draws_file_name(k),
                        n_draws,
                        acceptance: acceptance_json(&stats),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    results.into_iter().collect()
}

fn load_tree(path: &Path) -> CliResult<PhyloTree> {
    parse_newick(&read_text(path)?).map_err(|e| CliError::input(path, e))
}

/// Runs the configured chains, writing one draws file per chain and the
/// manifest into `cfg.out`.
pub fn fit(cfg: &RunConfig) -> CliResult<Manifest> {
    cfg.validate().map_err(CliError::Config)?;
    let start = Instant::now();
    let counts_path = cfg.counts.as_ref().expect("validated");
    let raw = parse_count_table(&read_text(counts_path)?).map_err(|e| CliError::input(counts_path, e))?;
    let (counts, scale_used) = rescale_counts(&raw, cfg.scale.to_scale())?;
    let prior = PartitionPrior::new(cfg.prior_spec(), counts.n_samples())?;
    let mut out = Outputs::new(&cfg.out)?;
    let (features, feature_kind, chains) = if cfg.model.uses_tree() {
        let tree_path = cfg.tree.as_ref().expect("validated");
        let tree = load_tree(tree_path)?;
        let tc = propagate_tree_counts(&counts, &tree)?;
        let kernel = DtmKernel::new(&tc, &tree, cfg.dtm_hyper())?;
        let paths = tree.internal_nodes().iter().map(|&v| tree.node_path(v)).collect();
        (paths, "node", run_chains(&kernel, &prior, cfg, &mut out)?)
    } else {
        let kernel = DmKernel::new(&counts, cfg.dm_hyper())?;
        (counts.feature_names().to_vec(), "otu", run_chains(&kernel, &prior, cfg, &mut out)?)
    };
    let manifest = Manifest {
        config: cfg.clone(),
        scale_used,
        feature_kind: feature_kind.into(),
        samples: counts.sample_names().to_vec(),
        features,
        chains,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    out.write(MANIFEST, serde_json::to_string_pretty(&manifest).unwrap() + "\n")?;
    out.commit();
    Ok(manifest)
}

// --------------------------------------------------------------- summarize

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub n_draws: usize,
    pub score: f64,
    /// Index of the winning draw in the pooled stream (chains in order).
    pub draw_index: usize,
    pub n_clusters: usize,
    pub zeta_symmetric: bool,
    pub zeta_unit_diagonal: bool,
}

fn for_each_draw(
    run_dir: &Path,
    manifest: &Manifest,
    mut f: impl FnMut(Draw) -> CliResult<()>,
) -> CliResult<()> {
    for chain in &manifest.chains {
        let path = run_dir.join(&chain.draws_file);
        let file = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
        for draw in read_draws(BufReader::new(file)) {
            let draw = draw.map_err(|e| CliError::input(&path, e))?;
            if draw.partition.len() != manifest.samples.len() || draw.selection.len() != manifest.features.len() {
                return Err(CliError::input(&path, "draw does not match the manifest dimensions"));
            }
            f(draw)?;
        }
    }
    Ok(())
}

pub fn read_manifest(run_dir: &Path) -> CliResult<Manifest> {
    let path = run_dir.join(MANIFEST);
    serde_json::from_str(&read_text(&path)?).map_err(|e| CliError::input(&path, e))
}

/// Pools the draws of a fit run and writes `zeta.csv`, `partition.csv`,
/// `selection_frequencies.csv` (OTU models) or `node_frequencies.csv` (tree
/// models) and `summary.json` into `out_dir`.
pub fn summarize(run_dir: &Path, out_dir: &Path) -> CliResult<Summary> {
    let manifest = read_manifest(run_dir)?;
    let mut acc = DrawAccumulator::new();
    for_each_draw(run_dir, &manifest, |d| Ok(acc.push(&d)?))?;
    let zeta = acc.coclustering().map_err(|_| CliError::input(run_dir, "no draws to summarize"))?;
    let n = zeta.n();
    let symmetric = (0..n).all(|i| (0..n).all(|j| zeta.get(i, j) == zeta.get(j, i)));
    let unit_diagonal = (0..n).all(|i| zeta.get(i, i) == 1.0);
    if !(symmetric && unit_diagonal && zeta.check_invariants()) {
        return Err(CliError::input(run_dir, "co-clustering matrix failed its invariants"));
    }

    let mut best: Option<(f64, usize, Partition)> = None;
    let mut idx = 0;
    for_each_draw(run_dir, &manifest, |d| {
        let score = ar_against_zeta(&d.partition, &zeta)?;
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, idx, d.partition.canonical()));
        }
        idx += 1;
        Ok(())
    })?;
    let (score, draw_index, estimate) = best.expect("nonempty");
    let freqs = acc.selection_frequencies()?;

    let mut out = Outputs::new(out_dir)?;
    let mut z = String::from("sample");
    for s in &manifest.samples {
        write!(z, ",{s}").unwrap();
    }
    z.push('\n');
    for (i, s) in manifest.samples.iter().enumerate() {
        z.push_str(s);
        for v in zeta.row(i) {
            write!(z, ",{v}").unwrap();
        }
        z.push('\n');
    }
    out.write("zeta.csv", z)?;

    let mut p = String::from("sample,cluster\n");
    for (s, &l) in manifest.samples.iter().zip(estimate.labels()) {
        writeln!(p, "{s},{}", l + 1).unwrap();
    }
    out.write("partition.csv", p)?;

    let (name, key) = if manifest.feature_kind == "node" {
        ("node_frequencies.csv", "node")
    } else {
        ("selection_frequencies.csv", "feature")
    };
    let mut f = format!("{key},frequency\n");
    for (feat, v) in manifest.features.iter().zip(&freqs) {
        writeln!(f, "{feat},{v}").unwrap();
    }
    out.write(name, f)?;

    let summary = Summary {
        n_draws: acc.n_draws(),
        score,
        draw_index,
        n_clusters: estimate.n_clusters(),
        zeta_symmetric: symmetric,
        zeta_unit_diagonal: unit_diagonal,
    };
    out.write("summary.json", serde_json::to_string_pretty(&summary).unwrap() + "\n")?;
    out.commit();
    Ok(summary)
}

// -------------------------------------------------------------------- eval

fn read_pairs(path: &Path) -> CliResult<Vec<(String, String)>> {
    let (_, rows) = parse_two_column_csv(&read_text(path)?).map_err(|e| CliError::input(path, e))?;
    Ok(rows)
}

/// Labels keyed by name, aligned to the order of `names`.
fn align<'a>(names: &[String], rows: &'a [(String, String)], path: &Path) -> CliResult<Vec<&'a str>> {
    let map: HashMap<&str, &str> = rows.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    if map.len() != rows.len() {
        return Err(CliError::input(path, "duplicate names"));
    }
    if map.len() != names.len() {
        return Err(CliError::input(path, format!("expected {} rows, found {}", names.len(), map.len())));
    }
    names
        .iter()
        .map(|n| {
            map.get(n.as_str())
                .copied()
                .ok_or_else(|| CliError::input(path, format!("missing {n:?}")))
        })
        .collect()
}

fn to_partition(labels: &[&str]) -> Partition {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    Partition::new(
        labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l).or_insert(next)
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    pub estimate: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub frequencies: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

/// Adjusted Rand of an estimate against true labels and/or ROC AUC of
/// selection frequencies against the informative truth, as a JSON object.
pub fn eval(args: &EvalArgs) -> CliResult<Value> {
    let mut result = serde_json::Map::new();
    match (&args.estimate, &args.labels) {
        (Some(est), Some(lab)) => {
            let est_rows = read_pairs(est)?;
            let names: Vec<String> = est_rows.iter().map(|(a, _)| a.clone()).collect();
            let lab_rows = read_pairs(lab)?;
            let a = to_partition(&est_rows.iter().map(|(_, b)| b.as_str()).collect::<Vec<_>>());
            let b = to_partition(&align(&names, &lab_rows, lab)?);
            result.insert("adjusted_rand".into(), json!(adjusted_rand(&a, &b)?));
        }
        (None, None) => {}
        _ => return Err(CliError::Config("`--estimate` and `--labels` go together".into())),
    }
    match (&args.frequencies, &args.truth) {
        (Some(fr), Some(tr)) => {
            let f_rows = read_pairs(fr)?;
            let names: Vec<String> = f_rows.iter().map(|(a, _)| a.clone()).collect();
            let scores = f_rows
                .iter()
                .map(|(n, v)| {
                    v.parse::<f64>()
                        .map_err(|_| CliError::input(fr, format!("bad frequency for {n:?}: {v:?}")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let t_rows = read_pairs(tr)?;
            let truth = align(&names, &t_rows, tr)?
                .into_iter()
                .map(|t| match t {
                    "1" | "true" => Ok(true),
                    "0" | "false" => Ok(false),
                    other => Err(CliError::input(tr, format!("bad truth value {other:?}"))),
                })
                .collect::<CliResult<Vec<_>>>()?;
            result.insert("auc".into(), json!(roc_auc(&scores, &truth)?));
        }
        (None, None) => {}
        _ => return Err(CliError::Config("`--frequencies` and `--truth` go together".into())),
    }
    if result.is_empty() {
        return Err(CliError::Config(
            "nothing to evaluate: pass --estimate/--labels and/or --frequencies/--truth".into(),
        ));
    }
    Ok(Value::Object(result))
}
