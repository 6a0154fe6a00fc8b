//! Run configuration for `fit`.

use std::path::PathBuf;

use mfmclust_core::{ComponentPrior, DmHyper, DtmHyper, McmcConfig, PriorSpec, PriorVariant, Scale};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "UPPERCASE")]
#[value(rename_all = "UPPERCASE")]
pub enum Model {
    Mfmdm,
    Mfmdtm,
    Dpdm,
    Dpdtm,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Mfmdm => "MFMDM",
            Model::Mfmdtm => "MFMDTM",
            Model::Dpdm => "DPDM",
            Model::Dpdtm => "DPDTM",
        }
    }

    pub fn uses_tree(self) -> bool {
        matches!(self, Model::Mfmdtm | Model::Dpdtm)
    }

    pub fn variant(self) -> PriorVariant {
        match self {
            Model::Mfmdm | Model::Mfmdtm => PriorVariant::Mfm,
            Model::Dpdm | Model::Dpdtm => PriorVariant::Dp,
        }
    }
}

/// Count scaling factor, or `"AUTO"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSetting {
    Factor(f64),
    Keyword(ScaleKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleKeyword {
    #[serde(rename = "AUTO")]
    Auto,
}

impl Default for ScaleSetting {
    fn default() -> Self {
        ScaleSetting::Factor(50.0)
    }
}

impl ScaleSetting {
    pub fn to_scale(self) -> Scale {
        match self {
            ScaleSetting::Factor(f) => Scale::Factor(f),
            ScaleSetting::Keyword(ScaleKeyword::Auto) => Scale::Auto,
        }
    }
}

impl std::str::FromStr for ScaleSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(ScaleSetting::Keyword(ScaleKeyword::Auto));
        }
        s.parse::<f64>()
            .map(ScaleSetting::Factor)
            .map_err(|_| format!("scale must be a positive number or AUTO, got {s:?}"))
    }
}

fn d_model() -> Model {
    Model::Mfmdm
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn d_iterations() -> usize {
    20_000
}
fn d_burn_in() -> usize {
    10_000
}
fn d_thin() -> usize {
    10
}
fn d_twenty() -> usize {
    20
}
fn d_chains() -> usize {
    1
}
fn d_out() -> PathBuf {
    PathBuf::from("run")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_model")]
    pub model: Model,
    #[serde(default)]
    pub counts: Option<PathBuf>,
    #[serde(default)]
    pub tree: Option<PathBuf>,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta1: f64,
    #[serde(default = "one")]
    pub beta2: f64,
    #[serde(default = "half")]
    pub w: f64,
    #[serde(default = "one")]
    pub eta: f64,
    /// Mean of `M - 1` under the shifted Poisson prior on component count.
    #[serde(default = "one")]
    pub poisson_lambda: f64,
    #[serde(default = "one")]
    pub dp_concentration: f64,
    #[serde(default)]
    pub scale: ScaleSetting,
    #[serde(default = "d_iterations")]
    pub iterations: usize,
    #[serde(default = "d_burn_in")]
    pub burn_in: usize,
    #[serde(default = "d_thin")]
    pub thin: usize,
    #[serde(default = "d_twenty")]
    pub gamma_moves: usize,
    #[serde(default = "d_twenty")]
    pub launch_scans: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_chains")]
    pub chains: usize,
    #[serde(default = "d_out")]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.counts.is_none() {
            return Err("missing field `counts`".into());
        }
        if self.model.uses_tree() && self.tree.is_none() {
            return Err(format!("model {} requires field `tree`", self.model.name()));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eta", self.eta),
            ("poisson_lambda", self.poisson_lambda),
            ("dp_concentration", self.dp_concentration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("`{name}` must be positive, got {v}"));
            }
        }
        if !(self.w > 0.0 && self.w < 1.0) {
            return Err(format!("`w` must lie in (0, 1), got {}", self.w));
        }
        if let ScaleSetting::Factor(f) = self.scale {
            if !(f > 0.0 && f.is_finite()) {
                return Err(format!("`scale` must be positive, got {f}"));
            }
        }
        if self.chains == 0 {
            return Err("`chains` must be at least 1".into());
        }
        self.mcmc(0).validate().map_err(|e| e.to_string())
    }

    pub fn mcmc(&self, chain: usize) -> McmcConfig {
        McmcConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thinning: self.thin,
            gamma_moves_per_iter: self.gamma_moves,
            launch_scans: self.launch_scans,
            seed: self.chain_seed(chain),
            check_caches: false,
        }
    }

    pub fn chain_seed(&self, chain: usize) -> u64 {
        self.seed.wrapping_add(chain as u64)
    }

    pub fn prior_spec(&self) -> PriorSpec {
        PriorSpec {
            eta: self.eta,
            components: ComponentPrior::ShiftedPoisson {
                lambda: self.poisson_lambda,
            },
            variant: self.model.variant(),
            dp_concentration: self.dp_concentration,
        }
    }

    pub fn dm_hyper(&self) -> DmHyper {
        DmHyper {
            alpha: self.alpha,
            beta1: self.beta1,
            beta2: self.beta2,
            w: self.w,
        }
    }

    pub fn dtm_hyper(&self) -> DtmHyper {
        DtmHyper {
            alpha: self.alpha,
            w: self.w,
        }
    }
}
