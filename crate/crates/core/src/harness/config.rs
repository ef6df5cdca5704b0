//! Experiment configuration.
//!
//! A config is a TOML document with the sections below. Unknown keys are
//! errors.
//!
//! ```toml
//! [experiment]
//! episodes = 300            # rounds (online) or dataset size (offline)
//! seeds = [1, 2, 3]         # or: first_seed = 1, seed_count = 200
//! output_dir = "out"
//! checkpoints = [100, 300]  # optional; default: every round / the full dataset
//! dataset = "data.csv"      # optional offline dataset instead of generating one
//!
//! [instance]
//! generator = "online_hard" # online_hard | offline_hard | random | file
//! actions = 4               # d for the hard chains, A for random
//! horizon = 4
//! states = 3                # random only
//! eta = 0.1                 # offline_hard only
//! epsilon = 0.5             # offline_hard behavior policy
//! p_min = 1e-3              # random only
//! path = "instance.json"    # file only
//! pinned_seed = 7           # optional: build the instance from this seed for every run
//!
//! [model_class]
//! generator = "structured"  # structured | perturbations_of_true | file
//! count = 8                 # perturbations_of_true
//! p_min = 1e-3
//! spread = 0.5
//! cap = 4096                # structured
//! path = "class.json"       # file
//!
//! [[algorithm]]
//! name = "cr_omle"          # cr_omle | omle_unweighted | cr_pmle
//! delta = 0.05
//! corruption_level = 16.0
//! known_corruption = true
//! alpha = 0.5               # optional overrides of the defaults
//! lambda = 1.0
//! beta = 3.0
//! exhaustive_policies = false
//!
//! [adversary]
//! strategy = "online_hard"  # null | online_hard | offline_hard | budgeted_random
//! budget = 16.0
//! magnitude = 0.5           # budgeted_random
//!
//! [measure]
//! epsilons = [0.05, 0.1, 0.2]
//! exact = true
//! dataset_episodes = 1000
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub instance: InstanceSpec,
    pub model_class: ModelClassSpec,
    #[serde(rename = "algorithm")]
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub measure: MeasureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub episodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_count: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceGenerator {
    OnlineHard,
    OfflineHard,
    Random,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub generator: InstanceGenerator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClassGenerator {
    Structured,
    #[serde(alias = "perturbations-of-true")]
    PerturbationsOfTrue,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelClassSpec {
    pub generator: ModelClassGenerator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default = "default_p_min")]
    pub p_min: f64,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn default_p_min() -> f64 {
    1e-3
}

fn default_spread() -> f64 {
    0.5
}

fn default_cap() -> usize {
    4096
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    CrOmle,
    OmleUnweighted,
    CrPmle,
}

impl AlgorithmName {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmName::CrOmle => "cr_omle",
            AlgorithmName::OmleUnweighted => "omle_unweighted",
            AlgorithmName::CrPmle => "cr_pmle",
        }
    }

    pub fn is_offline(&self) -> bool {
        matches!(self, AlgorithmName::CrPmle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: AlgorithmName,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub corruption_level: f64,
    #[serde(default = "default_true")]
    pub known_corruption: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub exhaustive_policies: bool,
}

fn default_delta() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryName {
    #[default]
    Null,
    OnlineHard,
    OfflineHard,
    BudgetedRandom,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    #[serde(default)]
    pub strategy: AdversaryName,
    #[serde(default)]
    pub budget: f64,
    #[serde(default)]
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub exact: bool,
    #[serde(default = "default_dataset_episodes")]
    pub dataset_episodes: usize,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec {
            epsilons: default_epsilons(),
            exact: false,
            dataset_episodes: default_dataset_episodes(),
        }
    }
}

fn default_epsilons() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}

fn default_dataset_episodes() -> usize {
    1000
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates a config. Relative paths are resolved against
    /// `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        if let Some(base) = base_dir {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent())
            .map_err(|e| config_err(format!("{}: {}", path.display(), strip_config(e))))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.experiment.output_dir);
        if let Some(p) = self.experiment.dataset.as_mut() {
            fix(p);
        }
        if let Some(p) = self.instance.path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.model_class.path.as_mut() {
            fix(p);
        }
    }

    /// Seeds in run order.
    pub fn seeds(&self) -> Vec<u64> {
        match (&self.experiment.seeds, self.experiment.first_seed, self.experiment.seed_count) {
            (Some(s), _, _) => s.clone(),
            (None, first, Some(n)) => (0..n as u64).map(|i| first.unwrap_or(0) + i).collect(),
            (None, Some(first), None) => vec![first],
            (None, None, None) => vec![0],
        }
    }

    /// Checkpoints in increasing order; defaults to every round for online
    /// algorithms and to the full dataset for offline ones.
    pub fn checkpoints(&self, offline: bool) -> Vec<usize> {
        match &self.experiment.checkpoints {
            Some(c) => c.clone(),
            None if offline => vec![self.experiment.episodes],
            None => (1..=self.experiment.episodes).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.episodes == 0 {
            return Err(config_err("experiment.episodes must be at least 1"));
        }
        if e.seeds.is_some() && (e.first_seed.is_some() || e.seed_count.is_some()) {
            return Err(config_err("experiment: give either `seeds` or `first_seed`/`seed_count`, not both"));
        }
        let seeds = self.seeds();
        if seeds.is_empty() {
            return Err(config_err("experiment: at least one seed is required"));
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return Err(config_err("experiment.seeds must be distinct"));
        }
        if let Some(c) = &e.checkpoints {
            if c.is_empty() || c.windows(2).any(|w| w[0] >= w[1]) || c[0] == 0 || *c.last().unwrap() > e.episodes {
                return Err(config_err(
                    "experiment.checkpoints must be strictly increasing values in 1..=episodes",
                ));
            }
        }
        if self.algorithms.is_empty() {
            return Err(config_err("at least one [[algorithm]] section is required"));
        }
        let names: BTreeSet<_> = self.algorithms.iter().map(|a| a.name).collect();
        if names.len() != self.algorithms.len() {
            return Err(config_err("each algorithm may appear only once"));
        }
        for a in &self.algorithms {
            if !(a.delta > 0.0 && a.delta < 1.0) {
                return Err(config_err(format!("algorithm {}: delta must lie in (0, 1)", a.name.as_str())));
            }
            if !(a.corruption_level >= 0.0) || !a.corruption_level.is_finite() {
                return Err(config_err(format!(
                    "algorithm {}: corruption_level must be finite and nonnegative",
                    a.name.as_str()
                )));
            }
            if a.exhaustive_policies && !a.name.is_offline() {
                return Err(config_err(format!(
                    "algorithm {}: exhaustive_policies applies to cr_pmle only",
                    a.name.as_str()
                )));
            }
            for (key, v) in [("alpha", a.alpha), ("lambda", a.lambda)] {
                if let Some(v) = v {
                    if !(v > 0.0) {
                        return Err(config_err(format!("algorithm {}: {key} must be positive", a.name.as_str())));
                    }
                }
            }
            if let Some(b) = a.beta {
                if !(b >= 0.0) || !b.is_finite() {
                    return Err(config_err(format!("algorithm {}: beta must be finite and nonnegative", a.name.as_str())));
                }
            }
        }
        self.validate_instance()?;
        self.validate_class()?;
        self.validate_adversary()?;
        if e.dataset.is_some() && self.algorithms.iter().any(|a| !a.name.is_offline()) {
            return Err(config_err("experiment.dataset is only meaningful for cr_pmle"));
        }
        if self.measure.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(config_err("measure.epsilons must be positive"));
        }
        Ok(())
    }

    fn validate_instance(&self) -> Result<()> {
        let i = &self.instance;
        let need = |v: Option<usize>, key: &str| v.ok_or_else(|| config_err(format!("instance.{key} is required")));
        let allowed: &[&str] = match i.generator {
            InstanceGenerator::OnlineHard => {
                need(i.actions, "actions")?;
                need(i.horizon, "horizon")?;
                &["actions", "horizon"]
            }
            InstanceGenerator::OfflineHard => {
                need(i.actions, "actions")?;
                need(i.horizon, "horizon")?;
                i.eta.ok_or_else(|| config_err("instance.eta is required"))?;
                i.epsilon.ok_or_else(|| config_err("instance.epsilon is required"))?;
                &["actions", "horizon", "eta", "epsilon"]
            }
            InstanceGenerator::Random => {
                need(i.states, "states")?;
                need(i.actions, "actions")?;
                need(i.horizon, "horizon")?;
                &["states", "actions", "horizon", "p_min"]
            }
            InstanceGenerator::File => {
                if i.path.is_none() {
                    return Err(config_err("instance.path is required for the file generator"));
                }
                &["path"]
            }
        };
        let present = [
            ("actions", i.actions.is_some()),
            ("horizon", i.horizon.is_some()),
            ("states", i.states.is_some()),
            ("eta", i.eta.is_some()),
            ("epsilon", i.epsilon.is_some()),
            ("p_min", i.p_min.is_some()),
            ("path", i.path.is_some()),
        ];
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(config_err(format!("instance.{key} does not apply to this generator")));
            }
        }
        Ok(())
    }

    fn validate_class(&self) -> Result<()> {
        let c = &self.model_class;
        match c.generator {
            ModelClassGenerator::Structured => {
                if !matches!(
                    self.instance.generator,
                    InstanceGenerator::OnlineHard | InstanceGenerator::OfflineHard
                ) {
                    return Err(config_err("model_class.generator = \"structured\" needs a hard instance"));
                }
                if c.cap == 0 {
                    return Err(config_err("model_class.cap must be at least 1"));
                }
            }
            ModelClassGenerator::PerturbationsOfTrue => {
                if c.count.unwrap_or(0) == 0 {
                    return Err(config_err("model_class.count must be at least 1"));
                }
            }
            ModelClassGenerator::File => {
                if c.path.is_none() {
                    return Err(config_err("model_class.path is required for the file generator"));
                }
            }
        }
        Ok(())
    }

    fn validate_adversary(&self) -> Result<()> {
        let a = &self.adversary;
        if !(a.budget >= 0.0) || !a.budget.is_finite() {
            return Err(config_err("adversary.budget must be finite and nonnegative"));
        }
        match a.strategy {
            AdversaryName::OnlineHard if self.instance.generator != InstanceGenerator::OnlineHard => {
                Err(config_err("adversary online_hard needs instance.generator = \"online_hard\""))
            }
            AdversaryName::OfflineHard if self.instance.generator != InstanceGenerator::OfflineHard => {
                Err(config_err("adversary offline_hard needs instance.generator = \"offline_hard\""))
            }
            AdversaryName::BudgetedRandom if !(0.0..1.0).contains(&a.magnitude) => {
                Err(config_err("adversary.magnitude must lie in [0, 1)"))
            }
            _ => Ok(()),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(s) => s,
        other => other.to_string(),
    }
}
