//! Complexity measurements for a configured instance and model class, and
//! instance/class/dataset generation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corruption::Adversary;
use crate::error::{Error, Result};
use crate::mdp::greedy_policy;
use crate::params::{default_parameters, CorruptionKnowledge, Params};
use crate::pmle::{fit_offline, generate_offline_dataset, OfflineOptions};
use crate::rng::{Purpose, SeedTree};
use crate::uncertainty::coverage::{coverage_coefficient, information_coefficient};
use crate::uncertainty::eluder::{
    eluder_dimension, eluder_dimension_exact, linear_eluder_bound, tabular_eluder_bound, EXACT_LIMIT,
};

use super::config::{AlgorithmName, ExperimentConfig};
use super::{build_adversary, build_class, build_instance, instance_seed, output, resolve_params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EluderRow {
    pub epsilon: f64,
    pub greedy_per_stage: Vec<usize>,
    pub greedy_max: usize,
    /// Present when exact search was requested and `S·A` is small enough.
    pub exact_per_stage: Option<Vec<usize>>,
    pub tabular_bound: f64,
    /// Linear bound with the one-hot embedding, `d = S·A`.
    pub linear_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMeasurement {
    pub seed: u64,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub class_size: usize,
    pub ratio_bound: f64,
    pub eluder: Vec<EluderRow>,
    pub dataset_episodes: usize,
    /// `None` when every sampled pair was identical at some stage.
    pub coverage: Option<f64>,
    pub information_coefficient: f64,
    pub information_coefficient_per_stage: Vec<f64>,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub measurements: Vec<SeedMeasurement>,
}

/// Parameters for the offline fit behind the information coefficient: the
/// first configured `cr_pmle`, or the defaults for the configured budget.
fn measure_params(cfg: &ExperimentConfig, class: &crate::model_class::ModelClass) -> Result<Params> {
    match cfg.algorithms.iter().find(|a| a.name == AlgorithmName::CrPmle) {
        Some(alg) => resolve_params(alg, class),
        None => default_parameters(
            class.len(),
            0.05,
            class.ratio_bound(),
            CorruptionKnowledge::Known(cfg.adversary.budget),
        ),
    }
}

pub fn measure_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedMeasurement> {
    let instance = build_instance(cfg, seed)?;
    let class = build_class(cfg, &instance, seed)?;
    let (s, a, h) = (class.num_states(), class.num_actions(), class.horizon());
    let candidates: Vec<(usize, usize)> = (0..s).flat_map(|x| (0..a).map(move |b| (x, b))).collect();
    let exact = cfg.measure.exact && candidates.len() <= EXACT_LIMIT;
    let eluder = cfg
        .measure
        .epsilons
        .iter()
        .map(|&eps| {
            let greedy: Vec<usize> = (0..h).map(|stage| eluder_dimension(&class, &candidates, stage, eps)).collect();
            let exact_per_stage = if exact {
                Some(
                    (0..h)
                        .map(|stage| eluder_dimension_exact(&class, &candidates, stage, eps))
                        .collect::<Result<Vec<_>>>()?,
                )
            } else {
                None
            };
            Ok(EluderRow {
                epsilon: eps,
                greedy_max: greedy.iter().copied().max().unwrap_or(0),
                greedy_per_stage: greedy,
                exact_per_stage,
                tabular_bound: tabular_eluder_bound(s, a, eps),
                linear_bound: linear_eluder_bound(s * a, eps),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let seeds = SeedTree::new(instance_seed(cfg, seed));
    let dataset = generate_offline_dataset(
        &instance.mdp,
        &instance.behavior_or_uniform(),
        &mut Adversary::null(),
        cfg.measure.dataset_episodes,
        &seeds.child(Purpose::Behavior, 0),
        false,
    )?;
    let pairs = dataset.pairs();
    let coverage = match coverage_coefficient(&class, &pairs) {
        Ok(c) => Some(c),
        Err(Error::AllPairsIdentical) => None,
        Err(e) => return Err(e),
    };
    let params = measure_params(cfg, &class)?;
    let fit = fit_offline(&dataset, &class, params, OfflineOptions::default())?;
    let ic = information_coefficient(
        &class,
        &fit.confidence_set,
        &fit.weights,
        &pairs,
        &greedy_policy(class.true_model()),
        params.lambda,
        params.alpha,
    )?;
    Ok(SeedMeasurement {
        seed,
        states: s,
        actions: a,
        horizon: h,
        class_size: class.len(),
        ratio_bound: class.ratio_bound(),
        eluder,
        dataset_episodes: cfg.measure.dataset_episodes,
        coverage,
        information_coefficient: ic.value,
        information_coefficient_per_stage: ic.per_stage,
        params,
    })
}

pub fn measure_complexity(cfg: &ExperimentConfig) -> Result<MeasureReport> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let measurements = seeds.iter().map(|&s| measure_seed(cfg, s)).collect::<Result<Vec<_>>>()?;
    Ok(MeasureReport {
        epsilons: cfg.measure.epsilons.clone(),
        seeds,
        measurements,
    })
}

/// Writes `measure.json` into `out_dir`.
pub fn measure_and_write(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let report = measure_complexity(cfg)?;
    let path = out_dir.join("measure.json");
    output::write_json(&path, &report)?;
    Ok(path)
}

/// Writes `instance.json` and `model_class.json` for the first configured
/// seed, plus `dataset.csv` (`experiment.episodes` episodes under the
/// configured adversary) when any configured algorithm is offline.
pub fn generate_instance_files(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let seed = *cfg
        .seeds()
        .first()
        .ok_or_else(|| Error::Config("no seeds configured".into()))?;
    let instance = build_instance(cfg, seed)?;
    let class = build_class(cfg, &instance, seed)?;
    let mut written = vec![out_dir.join("instance.json"), out_dir.join("model_class.json")];
    output::write_json(&written[0], &instance.to_file())?;
    output::write_json(&written[1], &class)?;
    if cfg.algorithms.iter().any(|a| a.name.is_offline()) {
        let mut adversary = build_adversary(cfg, &instance, seed)?;
        let dataset = generate_offline_dataset(
            &instance.mdp,
            &instance.behavior_or_uniform(),
            &mut adversary,
            cfg.experiment.episodes,
            &SeedTree::new(seed).child(Purpose::Behavior, 0),
            false,
        )?;
        let path = out_dir.join("dataset.csv");
        output::write_atomic(&path, &output::dataset_csv(&dataset.trajectories)?)?;
        written.push(path);
    }
    Ok(written)
}
