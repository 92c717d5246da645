//! Named constant profiles, sample counts and tolerances. The defaults are
//! embedded from `config/default.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mabp::PrimeField;
use crate::multiscale::ConstantsProfile;

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildDefaults {
    pub n: usize,
    pub profile: String,
    pub trials: usize,
    pub success_threshold: f64,
    /// Number of leading trials whose per-level trace is written as JSONL.
    pub trace_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleDefaults {
    pub mgf_k_max: u64,
    pub mgf_tolerance: f64,
    pub pgf_points: Vec<f64>,
    pub pgf_t_max: usize,
    pub pgf_tolerance: f64,
    pub pmf_oracle_t_max: usize,
    pub excursion_samples: usize,
    pub excursion_t_max: usize,
    pub excursion_slack: f64,
    pub forced_r_max: u64,
    pub descent_samples: usize,
    pub descent_h0: u64,
    pub descent_slack: f64,
    pub audit_m: usize,
    pub audit_trials: usize,
    /// Up probability of the deliberately biased sampler used as a negative control.
    pub negative_control_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapDefaults {
    pub instances: usize,
    pub n: usize,
    pub max_gap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MabpDefaults {
    pub sizes: Vec<usize>,
    pub sm_n: usize,
    pub sm_block_size: usize,
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceDefaults {
    pub n: usize,
    pub c: u64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerateDefaults {
    pub profile: String,
    pub sizes: Vec<usize>,
    pub cap: u64,
    pub builder_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub master_seed: u64,
    pub profiles: BTreeMap<String, ConstantsProfile>,
    pub field: PrimeField,
    pub build: BuildDefaults,
    pub martingale: MartingaleDefaults,
    pub gap: GapDefaults,
    pub mabp: MabpDefaults,
    pub reduce: ReduceDefaults,
    pub enumerate: EnumerateDefaults,
}

impl Default for Config {
    fn default() -> Self {
        Config::from_json(DEFAULT_CONFIG).expect("embedded config is valid")
    }
}

impl Config {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Config::from_json(&s)
    }

    fn validate(&self) -> Result<()> {
        self.profile(&self.build.profile)?;
        self.profile(&self.enumerate.profile)?;
        let t = self.build.success_threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("success threshold {t} not in [0, 1]")));
        }
        let b = self.martingale.negative_control_bias;
        if !(b > 0.0 && b < 0.5) {
            return Err(Error::Domain(format!("negative-control bias {b} not in (0, 1/2)")));
        }
        Ok(())
    }

    pub fn profile(&self, name: &str) -> Result<ConstantsProfile> {
        self.profiles
            .get(name)
            .copied()
            .ok_or_else(|| Error::Input(format!("unknown profile {name:?}")))
    }
}
