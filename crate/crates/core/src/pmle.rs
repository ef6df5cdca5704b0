//! Offline learner: pessimistic maximum likelihood with iterated uncertainty
//! weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corruption::{Adversary, CorruptionLedger};
use crate::error::{Error, Result};
use crate::mdp::{value_functions, ActionRule, EpisodicMdp, Evaluate, Policy, Trajectory, Transition};
use crate::model_class::ModelClass;
use crate::params::Params;
use crate::rng::SeedTree;
use crate::simulate::simulate_episode_logged;
use crate::uncertainty::{weight_iteration, WeightTable};

/// Largest number of deterministic policies enumerated in exhaustive mode.
pub const EXHAUSTIVE_LIMIT: usize = 4096;

/// `T` trajectories of `H` steps, plus the corruption that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineDataset {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub trajectories: Vec<Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<CorruptionLedger>,
}

impl OfflineDataset {
    /// Wraps externally supplied trajectories after checking their shape.
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, trajectories: Vec<Trajectory>) -> Result<Self> {
        let d = OfflineDataset {
            num_states,
            num_actions,
            horizon,
            trajectories,
            ledger: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for tr in &self.trajectories {
            if tr.steps.len() != self.horizon {
                return Err(Error::DimensionMismatch(format!(
                    "trajectory {} has {} steps, expected {}",
                    tr.episode,
                    tr.steps.len(),
                    self.horizon
                )));
            }
            for s in &tr.steps {
                if s.state >= self.num_states || s.next_state >= self.num_states || s.action >= self.num_actions {
                    return Err(Error::DimensionMismatch(format!("trajectory {} leaves the instance", tr.episode)));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Visited `(x, a)` per stage, in trajectory order.
    pub fn pairs(&self) -> Vec<Vec<(usize, usize)>> {
        (0..self.horizon)
            .map(|h| self.trajectories.iter().map(|tr| tr.pair(h)).collect())
            .collect()
    }

    /// All transitions, with `t` the trajectory's position in the dataset.
    pub fn transitions(&self) -> Vec<Transition> {
        self.trajectories
            .iter()
            .enumerate()
            .flat_map(|(t, tr)| tr.transitions().map(move |mut x| {
                x.t = t;
                x
            }))
            .collect()
    }

    /// The first `n` trajectories.
    pub fn prefix(&self, n: usize) -> OfflineDataset {
        OfflineDataset {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            trajectories: self.trajectories[..n.min(self.len())].to_vec(),
            ledger: None,
        }
    }
}

/// Collects `episodes` independent rollouts of `behavior` under `adversary`.
pub fn generate_offline_dataset<P: ActionRule + ?Sized>(
    true_model: &EpisodicMdp,
    behavior: &P,
    adversary: &mut Adversary,
    episodes: usize,
    seeds: &SeedTree,
    keep_ledger_rows: bool,
) -> Result<OfflineDataset> {
    behavior.check_against(true_model)?;
    let mut ledger = if keep_ledger_rows {
        CorruptionLedger::with_rows(true_model.horizon())
    } else {
        CorruptionLedger::new(true_model.horizon())
    };
    let trajectories = (0..episodes)
        .map(|t| simulate_episode_logged(true_model, behavior, adversary, seeds, t, Some(&mut ledger)).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(OfflineDataset {
        num_states: true_model.num_states(),
        num_actions: true_model.num_actions(),
        horizon: true_model.horizon(),
        trajectories,
        ledger: Some(ledger),
    })
}

/// Which policies the max-min step searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySearch {
    /// Greedy policies of every member of `M̂`, then of `M̄`.
    #[default]
    Candidates,
    /// Every deterministic Markov policy, after fixing the action at
    /// `(h, x)` cells where no member of `M̂` distinguishes actions.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OfflineOptions {
    pub search: PolicySearch,
    /// Cap on weight iterations per stage; `None` uses the default.
    pub iteration_cap: Option<usize>,
}

/// Result of [`fit_offline`].
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineFit {
    pub policy: Policy,
    /// `min_{M∈M̂} V_{M,π̂}` at the start distribution.
    pub maxmin_value: f64,
    pub confidence_set: Vec<usize>,
    pub reference: usize,
    pub weights: WeightTable,
    /// Iterations used by the weight iteration at each stage.
    pub iterations: Vec<usize>,
    /// Monotone weight traces per stage (`trace[k]` is `σ^k`).
    pub traces: Vec<Vec<Vec<f64>>>,
    /// Per-stage weighted log-likelihoods, indexed `[model][h]`.
    pub log_likelihood: Vec<Vec<f64>>,
    /// Every searched policy with its worst-case value over `M̂`.
    pub candidates: Vec<(Policy, f64)>,
}

/// Weights each stage by fixed-point iteration over the full class, fits the
/// weighted MLE `M̄`, keeps `M̂ = {M : ∀h, L_h(M) ≥ L_h(M̄) − β²}` and
/// returns the policy maximizing the worst-case value over `M̂`.
pub fn fit_offline(dataset: &OfflineDataset, class: &ModelClass, params: Params, options: OfflineOptions) -> Result<OfflineFit> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dataset.horizon != class.horizon()
        || dataset.num_states != class.num_states()
        || dataset.num_actions != class.num_actions()
    {
        return Err(Error::DimensionMismatch("dataset and class dimensions differ".into()));
    }
    let horizon = class.horizon();
    let pairs = dataset.pairs();
    let tv = class.pairwise_tv();
    let all: Vec<usize> = (0..class.len()).collect();
    let per_stage = (0..horizon)
        .into_par_iter()
        .map(|h| weight_iteration(&tv, &pairs[h], h, &all, params.alpha, params.lambda, options.iteration_cap))
        .collect::<Result<Vec<_>>>()?;
    let mut weights = WeightTable::ones(dataset.len(), horizon, params.alpha, params.lambda)?;
    for (h, w) in per_stage.iter().enumerate() {
        weights.set_stage(h, &w.sigma)?;
    }

    let mut log_likelihood = vec![vec![0.0; horizon]; class.len()];
    for (t, tr) in dataset.trajectories.iter().enumerate() {
        for (h, step) in tr.steps.iter().enumerate() {
            let s = weights.sigma(t, h);
            for (m, ll) in log_likelihood.iter_mut().enumerate() {
                let p = class.model(m).row(h, step.state, step.action)[step.next_state];
                if p <= 0.0 {
                    return Err(Error::ZeroLikelihood { model: m, h });
                }
                ll[h] += p.ln() / s;
            }
        }
    }
    let totals: Vec<f64> = log_likelihood.iter().map(|l| l.iter().sum()).collect();
    let mut reference = 0;
    for m in 1..class.len() {
        if totals[m] > totals[reference] {
            reference = m;
        }
    }
    let beta_sq = params.beta_sq();
    let bar = &log_likelihood[reference];
    let confidence_set: Vec<usize> = (0..class.len())
        .filter(|&m| log_likelihood[m].iter().zip(bar).all(|(l, b)| *l >= b - beta_sq))
        .collect();

    let policies = match options.search {
        PolicySearch::Candidates => {
            let cache = class.planning_cache();
            let mut out: Vec<Policy> = confidence_set.iter().map(|&m| cache.policies[m].clone()).collect();
            out.push(cache.policies[reference].clone());
            out
        }
        PolicySearch::Exhaustive => enumerate_policies(class, &confidence_set)?,
    };
    let candidates: Vec<(Policy, f64)> = policies
        .into_par_iter()
        .map(|pi| {
            let v = worst_case_value(class, &confidence_set, &pi);
            (pi, v)
        })
        .collect();
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.1 > candidates[best].1 {
            best = i;
        }
    }
    Ok(OfflineFit {
        policy: candidates[best].0.clone(),
        maxmin_value: candidates[best].1,
        confidence_set,
        reference,
        weights,
        iterations: per_stage.iter().map(|w| w.iterations()).collect(),
        traces: per_stage.into_iter().map(|w| w.trace).collect(),
        log_likelihood,
        candidates,
    })
}

/// `min_{M ∈ set} V_{M,π}` at the start distribution.
pub fn worst_case_value(class: &ModelClass, set: &[usize], policy: &Policy) -> f64 {
    set.iter()
        .map(|&m| {
            let model = class.model(m);
            value_functions(model, Evaluate::Policy(policy))
                .expect("policy matches class dimensions")
                .start_value(model)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Deterministic Markov policies that differ on cells where some member of
/// `set` distinguishes actions by reward or transition row. Other cells use
/// action 0, which leaves every value in `set` unchanged.
pub fn enumerate_policies(class: &ModelClass, set: &[usize]) -> Result<Vec<Policy>> {
    let (s, na, horizon) = (class.num_states(), class.num_actions(), class.horizon());
    let mut free = Vec::new();
    for h in 0..horizon {
        for x in 0..s {
            let distinguishes = set.iter().any(|&m| {
                let model = class.model(m);
                (1..na).any(|a| model.reward(h, x, a) != model.reward(h, x, 0) || model.row(h, x, a) != model.row(h, x, 0))
            });
            if distinguishes {
                free.push((h, x));
            }
        }
    }
    let count = (na as f64).powi(free.len() as i32);
    if count > EXHAUSTIVE_LIMIT as f64 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive search needs {count} policies, limit is {EXHAUSTIVE_LIMIT}"
        )));
    }
    let count = count as usize;
    let mut out = Vec::with_capacity(count);
    for mut code in 0..count {
        let mut pi = Policy::constant(horizon, s, 0);
        for &(h, x) in &free {
            pi.set_action(h, x, code % na);
            code /= na;
        }
        out.push(pi);
    }
    Ok(out)
}

/// `V_*(x1) − V_{π,*}(x1)` at the start distribution.
pub fn evaluate_suboptimality(policy: &Policy, true_model: &EpisodicMdp) -> Result<f64> {
    let opt = value_functions(true_model, Evaluate::Greedy)?.start_value(true_model);
    let val = value_functions(true_model, Evaluate::Policy(policy))?.start_value(true_model);
    Ok(opt - val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::greedy_policy;
    use crate::params::{default_parameters, CorruptionKnowledge};

    fn two_by_two(p: [f64; 4], reward: [f64; 2]) -> EpisodicMdp {
        let rows = |h: usize| {
            (0..2)
                .map(|x| (0..2).map(|a| {
                    let q = if h == 0 { p[x * 2 + a] } else { 0.5 };
                    vec![q, 1.0 - q]
                }).collect())
                .collect()
        };
        let r = vec![vec![vec![0.0; 2]; 2], vec![vec![reward[0]; 2], vec![reward[1]; 2]]];
        EpisodicMdp::new(vec![rows(0), rows(1)], r, 0).unwrap()
    }

    #[test]
    fn singleton_class_returns_greedy() {
        let m = two_by_two([0.2, 0.8, 0.5, 0.5], [1.0, 0.0]);
        let class = ModelClass::singleton(m.clone());
        let pi = Policy::constant(2, 2, 0);
        let data = generate_offline_dataset(&m, &pi, &mut Adversary::null(), 30, &SeedTree::new(1), false).unwrap();
        assert_eq!(data.ledger.as_ref().unwrap().max_stage_total(), 0.0);
        let params = default_parameters(1, 0.05, 1.0, CorruptionKnowledge::Known(1.0)).unwrap();
        let fit = fit_offline(&data, &class, params, OfflineOptions::default()).unwrap();
        assert_eq!(fit.policy, greedy_policy(&m));
        assert!(fit.weights.stage(0).iter().all(|&s| s == 1.0));
        assert_eq!(evaluate_suboptimality(&fit.policy, &m).unwrap(), 0.0);
    }

    #[test]
    fn exhaustive_covers_all_distinguishing_cells() {
        let a = two_by_two([0.2, 0.8, 0.5, 0.5], [1.0, 0.0]);
        let b = two_by_two([0.7, 0.3, 0.5, 0.5], [1.0, 0.0]);
        let class = ModelClass::new(vec![a, b], 0).unwrap();
        // Only (h=0, x=0) separates actions.
        assert_eq!(enumerate_policies(&class, &[0, 1]).unwrap().len(), 2);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let m = two_by_two([0.2, 0.8, 0.5, 0.5], [1.0, 0.0]);
        let class = ModelClass::singleton(m);
        let data = OfflineDataset::new(2, 2, 2, vec![]).unwrap();
        let params = default_parameters(1, 0.05, 1.0, CorruptionKnowledge::Known(1.0)).unwrap();
        assert_eq!(fit_offline(&data, &class, params, OfflineOptions::default()), Err(Error::EmptyDataset));
    }

    #[test]
    fn suboptimality_of_a_bad_policy() {
        let m = two_by_two([0.2, 0.8, 0.5, 0.5], [1.0, 0.0]);
        let bad = Policy::constant(2, 2, 0);
        assert!((evaluate_suboptimality(&bad, &m).unwrap() - 0.6).abs() < 1e-12);
    }
}
