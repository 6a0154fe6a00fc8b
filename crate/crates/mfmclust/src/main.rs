use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfmclust::commands::{self, Preset};
use mfmclust::{CliError, CliResult, EvalArgs, Model, RunConfig, ScaleSetting, SimulateConfig};

#[derive(Parser)]
#[command(name = "mfmclust", version, about = "Bayesian clustering of microbiome count tables with feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a two-group synthetic count table with known truth.
    Simulate(SimulateFlags),
    /// Run MCMC chains and write draws files plus a manifest.
    Fit(FitFlags),
    /// Pool draws into co-clustering, partition and frequency estimates.
    Summarize(SummarizeFlags),
    /// Score an estimate or selection frequencies against the truth.
    Eval(EvalFlags),
}

#[derive(Args)]
struct SimulateFlags {
    /// JSON file with simulation settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// 1..=5; the group shift is scenario/5.
    #[arg(long)]
    scenario: Option<u32>,
    /// Group shift in [0, 1], overriding the scenario.
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Base abundances, one value per line.
    #[arg(long)]
    base_profile: Option<PathBuf>,
    #[arg(long)]
    n_per_group: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    /// Dirichlet concentration sum.
    #[arg(long)]
    concentration: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitFlags {
    /// Flat JSON run configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// Sample-by-OTU count table (TSV).
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Newick tree over the OTUs (DTM models).
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Positive rescaling factor or AUTO.
    #[arg(long)]
    scale: Option<ScaleSetting>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Independent chains run concurrently; chain k uses seed + k.
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeFlags {
    /// Directory written by `fit`.
    #[arg(long)]
    run: PathBuf,
    /// Defaults to the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalFlags {
    /// partition.csv from `summarize`.
    #[arg(long)]
    estimate: Option<PathBuf>,
    /// labels.csv from `simulate`.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// selection_frequencies.csv from `summarize`.
    #[arg(long)]
    frequencies: Option<PathBuf>,
    /// truth.csv from `simulate`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn load_json<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(f) => {
            let mut cfg: SimulateConfig = load_json(f.config.as_deref())?;
            if let Some(v) = f.preset {
                cfg.preset = v;
            }
            if let Some(v) = f.scenario {
                cfg.scenario = v;
            }
            if f.separation.is_some() {
                cfg.separation = f.separation;
            }
            if let Some(v) = f.seed {
                cfg.seed = v;
            }
            if f.base_profile.is_some() {
                cfg.base_profile = f.base_profile;
            }
            if f.n_per_group.is_some() {
                cfg.n_per_group = f.n_per_group;
            }
            if f.depth.is_some() {
                cfg.depth = f.depth;
            }
            if f.concentration.is_some() {
                cfg.concentration_sum = f.concentration;
            }
            if let Some(v) = f.out {
                cfg.out = v;
            }
            for p in commands::simulate(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Fit(f) => {
            let mut cfg: RunConfig = load_json(f.config.as_deref())?;
            if let Some(v) = f.model {
                cfg.model = v;
            }
            if f.counts.is_some() {
                cfg.counts = f.counts;
            }
            if f.tree.is_some() {
                cfg.tree = f.tree;
            }
            if let Some(v) = f.scale {
                cfg.scale = v;
            }
            if let Some(v) = f.iterations {
                cfg.iterations = v;
            }
            if let Some(v) = f.burn_in {
                cfg.burn_in = v;
            }
            if let Some(v) = f.thin {
                cfg.thin = v;
            }
            if let Some(v) = f.seed {
                cfg.seed = v;
            }
            if let Some(v) = f.chains {
                cfg.chains = v;
            }
            if let Some(v) = f.out {
                cfg.out = v;
            }
            let manifest = commands::fit(&cfg)?;
            println!("{}", cfg.out.join(commands::MANIFEST).display());
            for c in &manifest.chains {
                println!("{}", cfg.out.join(&c.draws_file).display());
            }
        }
        Command::Summarize(f) => {
            let out = f.out.unwrap_or_else(|| f.run.clone());
            let s = commands::summarize(&f.run, &out)?;
            println!("{}", serde_json::to_string(&s).expect("serializable"));
        }
        Command::Eval(f) => {
            let args = EvalArgs {
                estimate: f.estimate,
                labels: f.labels,
                frequencies: f.frequencies,
                truth: f.truth,
            };
            println!("{}", commands::eval(&args)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
