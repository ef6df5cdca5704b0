//! Seeded experiment runner: builds instances, model classes and adversaries
//! from a config, runs every `(seed, algorithm)` cell and emits CSV/JSON.

pub mod config;
pub mod measure;
pub mod output;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corruption::{Adversary, LedgerSummary};
use crate::error::{Error, Result};
use crate::instances::{
    make_offline_hard_instance, make_online_hard_instance, perturbations_of_true, random_instance, structured_class,
    HardFamily, HardInstance,
};
use crate::mdp::{greedy_policy, EpisodicMdp, StochasticPolicy, Trajectory};
use crate::model_class::ModelClass;
use crate::omle::{run_online, OnlineOptions, RoundRecord, Weighting};
use crate::params::{default_parameters, CorruptionKnowledge, Params};
use crate::pmle::{evaluate_suboptimality, fit_offline, generate_offline_dataset, OfflineDataset, OfflineOptions, PolicySearch};
use crate::rng::{Purpose, SeedTree};
use crate::uncertainty::coverage::{coverage_coefficient, information_coefficient};

use config::{AdversaryName, AlgorithmName, AlgorithmSpec, ExperimentConfig, InstanceGenerator, ModelClassGenerator};

/// On-disk instance format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub mdp: EpisodicMdp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal_actions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<StochasticPolicy>,
}

/// A generated (or loaded) true instance.
#[derive(Debug, Clone)]
pub struct BuiltInstance {
    pub mdp: EpisodicMdp,
    pub hard: Option<(HardInstance, HardFamily)>,
    pub behavior: Option<StochasticPolicy>,
}

impl BuiltInstance {
    pub fn optimal_actions(&self) -> Option<&[usize]> {
        self.hard.as_ref().map(|(h, _)| h.optimal_actions.as_slice())
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            mdp: self.mdp.clone(),
            optimal_actions: self.optimal_actions().map(<[usize]>::to_vec),
            behavior: self.behavior.clone(),
        }
    }

    /// Behavior policy for offline data: the instance's own, or uniform.
    pub fn behavior_or_uniform(&self) -> StochasticPolicy {
        self.behavior.clone().unwrap_or_else(|| {
            let na = self.mdp.num_actions();
            let row = vec![1.0 / na as f64; na];
            StochasticPolicy::new(vec![vec![row; self.mdp.num_states()]; self.mdp.horizon()])
                .expect("uniform rows are valid")
        })
    }
}

/// Seed used to build the instance and class of the run with `seed`.
pub fn instance_seed(cfg: &ExperimentConfig, seed: u64) -> u64 {
    cfg.instance.pinned_seed.unwrap_or(seed)
}

/// Invalid generator arguments come from the config.
fn as_config<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter(m) | Error::DimensionMismatch(m) => Error::Config(m),
        e => e,
    })
}

pub fn build_instance(cfg: &ExperimentConfig, seed: u64) -> Result<BuiltInstance> {
    as_config(build_instance_inner(cfg, seed))
}

pub fn build_class(cfg: &ExperimentConfig, instance: &BuiltInstance, seed: u64) -> Result<ModelClass> {
    as_config(build_class_inner(cfg, instance, seed))
}

pub fn build_adversary(cfg: &ExperimentConfig, instance: &BuiltInstance, seed: u64) -> Result<Adversary> {
    as_config(build_adversary_inner(cfg, instance, seed))
}

fn build_instance_inner(cfg: &ExperimentConfig, seed: u64) -> Result<BuiltInstance> {
    let spec = &cfg.instance;
    let seeds = SeedTree::new(instance_seed(cfg, seed));
    let missing = |k: &str| Error::Config(format!("instance.{k} is required"));
    match spec.generator {
        InstanceGenerator::OnlineHard => {
            let inst = make_online_hard_instance(
                spec.actions.ok_or_else(|| missing("actions"))?,
                spec.horizon.ok_or_else(|| missing("horizon"))?,
                &seeds,
            )?;
            Ok(BuiltInstance {
                mdp: inst.mdp.clone(),
                hard: Some((inst, HardFamily::Online)),
                behavior: None,
            })
        }
        InstanceGenerator::OfflineHard => {
            let eta = spec.eta.ok_or_else(|| missing("eta"))?;
            let (inst, behavior) = make_offline_hard_instance(
                spec.actions.ok_or_else(|| missing("actions"))?,
                spec.horizon.ok_or_else(|| missing("horizon"))?,
                eta,
                spec.epsilon.ok_or_else(|| missing("epsilon"))?,
                &seeds,
            )?;
            Ok(BuiltInstance {
                mdp: inst.mdp.clone(),
                hard: Some((inst, HardFamily::Offline { eta })),
                behavior: Some(behavior),
            })
        }
        InstanceGenerator::Random => Ok(BuiltInstance {
            mdp: random_instance(
                spec.states.ok_or_else(|| missing("states"))?,
                spec.actions.ok_or_else(|| missing("actions"))?,
                spec.horizon.ok_or_else(|| missing("horizon"))?,
                spec.p_min.unwrap_or(cfg.model_class.p_min),
                &seeds,
            )?,
            hard: None,
            behavior: None,
        }),
        InstanceGenerator::File => {
            let path = spec.path.as_deref().ok_or_else(|| missing("path"))?;
            let file: InstanceFile = output::read_json(path)?;
            file.mdp.validate()?;
            if let Some(b) = &file.behavior {
                b.check_against(&file.mdp)?;
            }
            Ok(BuiltInstance {
                mdp: file.mdp,
                hard: None,
                behavior: file.behavior,
            })
        }
    }
}

fn build_class_inner(cfg: &ExperimentConfig, instance: &BuiltInstance, seed: u64) -> Result<ModelClass> {
    let spec = &cfg.model_class;
    match spec.generator {
        ModelClassGenerator::Structured => {
            let (hard, family) = instance
                .hard
                .as_ref()
                .ok_or_else(|| Error::Config("structured model classes need a hard instance".into()))?;
            structured_class(hard, *family, spec.cap)
        }
        ModelClassGenerator::PerturbationsOfTrue => {
            let seeds = SeedTree::new(instance_seed(cfg, seed)).child(Purpose::ModelClass, 0);
            perturbations_of_true(&instance.mdp, spec.count.unwrap_or(1), spec.p_min, spec.spread, &seeds)
        }
        ModelClassGenerator::File => {
            let path = spec
                .path
                .as_deref()
                .ok_or_else(|| Error::Config("model_class.path is required".into()))?;
            let class: ModelClass = output::read_json(path)?;
            if class.true_model() != &instance.mdp {
                return Err(Error::Config(format!(
                    "{}: the class's true model differs from the instance",
                    path.display()
                )));
            }
            Ok(class)
        }
    }
}

fn build_adversary_inner(cfg: &ExperimentConfig, instance: &BuiltInstance, seed: u64) -> Result<Adversary> {
    let spec = &cfg.adversary;
    let actions = || {
        instance
            .optimal_actions()
            .map(<[usize]>::to_vec)
            .ok_or_else(|| Error::Config("this adversary needs a hard instance".into()))
    };
    match spec.strategy {
        AdversaryName::Null => Ok(Adversary::null()),
        AdversaryName::OnlineHard => Adversary::online_lower_bound(actions()?, spec.budget),
        AdversaryName::OfflineHard => {
            let eta = cfg.instance.eta.ok_or_else(|| Error::Config("instance.eta is required".into()))?;
            Adversary::offline_lower_bound(actions()?, eta, spec.budget)
        }
        AdversaryName::BudgetedRandom => {
            let key = SeedTree::new(seed).child(Purpose::Adversary, 0).key();
            Adversary::budgeted_random(spec.budget, spec.magnitude, key)
        }
    }
}

/// Default parameters for `alg` on `class`, with any overrides applied.
pub fn resolve_params(alg: &AlgorithmSpec, class: &ModelClass) -> Result<Params> {
    let knowledge = match alg.name {
        AlgorithmName::OmleUnweighted => CorruptionKnowledge::Known(0.0),
        _ if alg.known_corruption => CorruptionKnowledge::Known(alg.corruption_level),
        _ => CorruptionKnowledge::Tolerance(alg.corruption_level),
    };
    let mut p = as_config(default_parameters(class.len(), alg.delta, class.ratio_bound(), knowledge))?;
    if let Some(a) = alg.alpha {
        p.alpha = a;
    }
    if let Some(l) = alg.lambda {
        p.lambda = l;
    }
    if let Some(b) = alg.beta {
        p.beta = b;
    }
    Ok(p)
}

/// One row of an offline per-run table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineRow {
    pub episodes: usize,
    pub suboptimality: f64,
    pub c_realized_max_stage: Option<f64>,
    pub conf_set_size: usize,
    pub max_sigma: f64,
    pub coverage: Option<f64>,
    pub information_coefficient: f64,
    pub truth_in_confidence_set: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "snake_case")]
pub enum CellTable {
    Online(Vec<RoundRecord>),
    Offline(Vec<OfflineRow>),
}

/// Outcome of one `(seed, algorithm)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutput {
    pub algorithm: AlgorithmName,
    pub seed: u64,
    pub params: Params,
    pub class_size: usize,
    pub ratio_bound: f64,
    pub budget: f64,
    pub realized_corruption: Option<LedgerSummary>,
    /// Online: `M*` stayed in every confidence set. Offline: `M* ∈ M̂` at the
    /// last checkpoint.
    pub truth_retained: bool,
    pub table: CellTable,
}

/// Everything an experiment produces, before it is written.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub cells: Vec<CellOutput>,
    pub wall_time_seconds: f64,
}

/// Runs every cell, using at most `jobs` worker threads. Cells are
/// independent, so results do not depend on `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize, exhaustive_policies: bool) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let cells: Vec<(u64, &AlgorithmSpec)> = cfg
        .seeds()
        .into_iter()
        .flat_map(|s| cfg.algorithms.iter().map(move |a| (s, a)))
        .collect();
    let dataset = match &cfg.experiment.dataset {
        Some(path) => Some(output::read_dataset_csv(path)?),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let results = pool.install(|| {
        cells
            .par_iter()
            .map(|&(seed, alg)| run_cell(cfg, seed, alg, exhaustive_policies, dataset.as_deref()))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExperimentOutput {
        config: cfg.clone(),
        cells: results,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs one `(seed, algorithm)` cell.
pub fn run_cell(
    cfg: &ExperimentConfig,
    seed: u64,
    alg: &AlgorithmSpec,
    exhaustive_policies: bool,
    dataset: Option<&[Trajectory]>,
) -> Result<CellOutput> {
    let instance = build_instance(cfg, seed)?;
    let class = build_class(cfg, &instance, seed)?;
    let mut adversary = build_adversary(cfg, &instance, seed)?;
    let params = resolve_params(alg, &class)?;
    let seeds = SeedTree::new(seed);
    let base = |truth_retained, realized, table| CellOutput {
        algorithm: alg.name,
        seed,
        params,
        class_size: class.len(),
        ratio_bound: class.ratio_bound(),
        budget: cfg.adversary.budget,
        realized_corruption: realized,
        truth_retained,
        table,
    };
    match alg.name {
        AlgorithmName::CrOmle | AlgorithmName::OmleUnweighted => {
            let weighting = if alg.name == AlgorithmName::CrOmle {
                Weighting::Uncertainty
            } else {
                Weighting::Unweighted
            };
            let options = OnlineOptions {
                episodes: cfg.experiment.episodes,
                ..Default::default()
            };
            let run = run_online(&class, &mut adversary, params, weighting, options, &seeds)?;
            let checkpoints = cfg.checkpoints(false);
            let rows = checkpoints.iter().map(|&t| run.rounds[t - 1].clone()).collect();
            Ok(base(run.truth_always_in_set, Some(run.ledger.summary()), CellTable::Online(rows)))
        }
        AlgorithmName::CrPmle => {
            let data = match dataset {
                Some(trajectories) => OfflineDataset::new(
                    instance.mdp.num_states(),
                    instance.mdp.num_actions(),
                    instance.mdp.horizon(),
                    trajectories.to_vec(),
                )?,
                None => generate_offline_dataset(
                    &instance.mdp,
                    &instance.behavior_or_uniform(),
                    &mut adversary,
                    cfg.experiment.episodes,
                    &seeds.child(Purpose::Behavior, 0),
                    false,
                )?,
            };
            let search = if alg.exhaustive_policies || exhaustive_policies {
                PolicySearch::Exhaustive
            } else {
                PolicySearch::Candidates
            };
            let options = OfflineOptions {
                search,
                iteration_cap: None,
            };
            let optimal = greedy_policy(class.true_model());
            let mut rows = Vec::new();
            let mut retained = false;
            for &n in &cfg.checkpoints(true) {
                if n > data.len() {
                    return Err(Error::Config(format!("checkpoint {n} exceeds the dataset size {}", data.len())));
                }
                let prefix = data.prefix(n);
                let fit = fit_offline(&prefix, &class, params, options)?;
                let pairs = prefix.pairs();
                let coverage = match coverage_coefficient(&class, &pairs) {
                    Ok(c) => Some(c),
                    Err(Error::AllPairsIdentical) => None,
                    Err(e) => return Err(e),
                };
                let ic = information_coefficient(
                    &class,
                    &fit.confidence_set,
                    &fit.weights,
                    &pairs,
                    &optimal,
                    params.lambda,
                    params.alpha,
                )?;
                let c_realized = data.ledger.as_ref().map(|l| {
                    let mut per_stage = vec![0.0; class.horizon()];
                    for e in l.entries().iter().filter(|e| e.t < n) {
                        per_stage[e.h] += e.c;
                    }
                    per_stage.into_iter().fold(0.0, f64::max)
                });
                retained = fit.confidence_set.contains(&class.true_index());
                rows.push(OfflineRow {
                    episodes: n,
                    suboptimality: evaluate_suboptimality(&fit.policy, class.true_model())?,
                    c_realized_max_stage: c_realized,
                    conf_set_size: fit.confidence_set.len(),
                    max_sigma: fit.weights.max_sigma(),
                    coverage,
                    information_coefficient: ic.value,
                    truth_in_confidence_set: retained,
                });
            }
            let realized = data.ledger.as_ref().map(|l| l.summary());
            Ok(base(retained, realized, CellTable::Offline(rows)))
        }
    }
}

/// Runs `cfg` and writes its outputs into `out_dir`; returns the written paths.
pub fn run_and_write(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize, exhaustive_policies: bool) -> Result<Vec<std::path::PathBuf>> {
    let result = run_experiment(cfg, jobs, exhaustive_policies)?;
    output::write_experiment(&result, out_dir)
}
