//! Instance and model-class generators, including the four-state chains
//! that realize the regret and suboptimality lower bounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{EpisodicMdp, StochasticPolicy};
use crate::model_class::ModelClass;
use crate::rng::{Purpose, SeedTree};

const X0: usize = 0;
const X1: usize = 1;
const X2: usize = 2;
const X3: usize = 3;

/// A hard chain with its per-stage optimal actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstance {
    pub mdp: EpisodicMdp,
    pub optimal_actions: Vec<usize>,
    pub num_actions: usize,
    /// `P(x_2 | x_1, a*_h)` and `P(x_2 | x_1, a)` for `a ≠ a*_h`.
    pub success: (f64, f64),
}

/// Builds the four-state chain. From `x_0` the chain moves to `x_1` with
/// probability `1/H` under any action; from `x_1` it reaches `x_2` with
/// probability `good` under `a*_h` and `bad` otherwise, the rest going to
/// `x_3`; `x_2, x_3` are absorbing and reward 1 is paid in `x_2` at the last
/// stage.
pub fn hard_chain(num_actions: usize, horizon: usize, optimal_actions: &[usize], good: f64, bad: f64) -> Result<EpisodicMdp> {
    if optimal_actions.len() != horizon || optimal_actions.iter().any(|&a| a >= num_actions) {
        return Err(Error::InvalidParameter("one optimal action per stage, within the action set".into()));
    }
    let stay = 1.0 - 1.0 / horizon as f64;
    let mut p = vec![vec![vec![vec![0.0; 4]; num_actions]; 4]; horizon];
    let mut r = vec![vec![vec![0.0; num_actions]; 4]; horizon];
    for h in 0..horizon {
        for a in 0..num_actions {
            p[h][X0][a][X0] = stay;
            p[h][X0][a][X1] = 1.0 - stay;
            let q = if a == optimal_actions[h] { good } else { bad };
            p[h][X1][a][X2] = q;
            p[h][X1][a][X3] = 1.0 - q;
            p[h][X2][a][X2] = 1.0;
            p[h][X3][a][X3] = 1.0;
        }
    }
    for a in 0..num_actions {
        r[horizon - 1][X2][a] = 1.0;
    }
    EpisodicMdp::new(p, r, X0)
}

/// Online hard instance with `d` actions and `a*_h` uniform over all actions.
pub fn make_online_hard_instance(d: usize, horizon: usize, seeds: &SeedTree) -> Result<HardInstance> {
    if d < 2 || horizon < 3 {
        return Err(Error::InvalidParameter(format!(
            "online hard instance needs d ≥ 2 and H ≥ 3, got d = {d}, H = {horizon}"
        )));
    }
    let optimal_actions = draw_actions(d, horizon, seeds);
    online_hard_with(d, optimal_actions)
}

/// Online hard instance with given optimal actions.
pub fn online_hard_with(d: usize, optimal_actions: Vec<usize>) -> Result<HardInstance> {
    let mdp = hard_chain(d, optimal_actions.len(), &optimal_actions, 0.75, 0.25)?;
    Ok(HardInstance {
        mdp,
        optimal_actions,
        num_actions: d,
        success: (0.75, 0.25),
    })
}

/// Offline hard instance: success `1/2 ± η`, `a*_h` uniform over the first
/// `d − 1` actions, and the behavior policy that plays the last action with
/// probability `1 − ε` and otherwise a uniform other action.
pub fn make_offline_hard_instance(
    d: usize,
    horizon: usize,
    eta: f64,
    epsilon: f64,
    seeds: &SeedTree,
) -> Result<(HardInstance, StochasticPolicy)> {
    if d <= 3 || horizon <= 2 {
        return Err(Error::InvalidParameter(format!(
            "offline hard instance needs d > 3 and H > 2, got d = {d}, H = {horizon}"
        )));
    }
    let optimal_actions = draw_actions(d - 1, horizon, seeds);
    let inst = offline_hard_with(d, eta, optimal_actions)?;
    let behavior = offline_behavior_policy(d, horizon, epsilon)?;
    Ok((inst, behavior))
}

/// Offline hard instance with given optimal actions.
pub fn offline_hard_with(d: usize, eta: f64, optimal_actions: Vec<usize>) -> Result<HardInstance> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1/2), got {eta}")));
    }
    let (good, bad) = (0.5 + eta, 0.5 - eta);
    let mdp = hard_chain(d, optimal_actions.len(), &optimal_actions, good, bad)?;
    Ok(HardInstance {
        mdp,
        optimal_actions,
        num_actions: d,
        success: (good, bad),
    })
}

/// Plays action `d − 1` with probability `1 − ε`, otherwise one of the
/// others uniformly, in every state and stage.
pub fn offline_behavior_policy(d: usize, horizon: usize, epsilon: f64) -> Result<StochasticPolicy> {
    if !(0.0..=1.0).contains(&epsilon) || d < 2 {
        return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    let mut row = vec![epsilon / (d - 1) as f64; d];
    row[d - 1] = 1.0 - epsilon;
    StochasticPolicy::new(vec![vec![row; 4]; horizon])
}

/// `η = C / (96e·Cov·T)`.
pub fn lower_bound_eta(corruption: f64, coverage: f64, episodes: usize) -> f64 {
    corruption / (96.0 * std::f64::consts::E * coverage * episodes as f64)
}

/// Coverage level of the offline hard instance's behavior policy,
/// `ε/(4eH(d−1))`.
pub fn offline_coverage_floor(d: usize, horizon: usize, epsilon: f64) -> f64 {
    epsilon / (4.0 * std::f64::consts::E * horizon as f64 * (d - 1) as f64)
}

fn draw_actions(choices: usize, horizon: usize, seeds: &SeedTree) -> Vec<usize> {
    let mut rng = seeds.child(Purpose::Instance, 0).rng();
    (0..horizon).map(|_| rng.random_range(0..choices)).collect()
}

/// Random instance with every row of full support, entries at least `p_min`,
/// and rewards in `[0, 1/H]`.
pub fn random_instance(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    p_min: f64,
    seeds: &SeedTree,
) -> Result<EpisodicMdp> {
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(Error::InvalidParameter("dimensions must be positive".into()));
    }
    check_p_min(p_min, num_states)?;
    let mut rng = seeds.child(Purpose::Instance, 1).rng();
    let mut p = Vec::with_capacity(horizon * num_states * num_actions * num_states);
    let mut r = Vec::with_capacity(horizon * num_states * num_actions);
    for _ in 0..horizon * num_states * num_actions {
        let raw: Vec<f64> = (0..num_states).map(|_| rng.random::<f64>() + 1e-3).collect();
        p.extend(mix_floor(&raw, p_min));
        r.push(rng.random::<f64>() / horizon as f64);
    }
    EpisodicMdp::from_flat(num_states, num_actions, horizon, p, r, 0)
}

fn check_p_min(p_min: f64, support: usize) -> Result<()> {
    if !(p_min >= 0.0) || p_min * support as f64 > 1.0 {
        return Err(Error::InvalidParameter(format!("p_min = {p_min} is infeasible")));
    }
    Ok(())
}

/// `(1 − k·p_min)·normalize(raw) + p_min` on the support of `raw`.
fn mix_floor(raw: &[f64], p_min: f64) -> Vec<f64> {
    let k = raw.iter().filter(|&&v| v > 0.0).count() as f64;
    let total: f64 = raw.iter().sum();
    raw.iter()
        .map(|&v| if v > 0.0 { (1.0 - k * p_min) * v / total + p_min } else { 0.0 })
        .collect()
}

/// Which hard instance a structured class is built around.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HardFamily {
    Online,
    Offline { eta: f64 },
}

/// One model per assignment of optimal actions to the stages where the
/// assignment matters (stages `1..H−1`, 0-based). The first and last stages
/// keep the true instance's actions. Assignments are enumerated in
/// lexicographic order and truncated to `cap`; the true model is always
/// kept, replacing the last enumerated model if needed.
pub fn structured_class(instance: &HardInstance, family: HardFamily, cap: usize) -> Result<ModelClass> {
    if cap == 0 {
        return Err(Error::InvalidParameter("class cap must be positive".into()));
    }
    let horizon = instance.optimal_actions.len();
    let d = instance.num_actions;
    let choices = match family {
        HardFamily::Online => d,
        HardFamily::Offline { .. } => d - 1,
    };
    let free = horizon - 2;
    let total = (choices as f64).powi(free as i32);
    let count = if total > cap as f64 { cap } else { total as usize };
    let build = |assign: &[usize]| -> Result<EpisodicMdp> {
        let mut actions = instance.optimal_actions.clone();
        actions[1..horizon - 1].copy_from_slice(assign);
        let (good, bad) = instance.success;
        hard_chain(d, horizon, &actions, good, bad)
    };
    let truth_assign = &instance.optimal_actions[1..horizon - 1];
    let mut assigns: Vec<Vec<usize>> = (0..count)
        .map(|mut code| {
            (0..free)
                .rev()
                .map(|_| {
                    let a = code % choices;
                    code /= choices;
                    a
                })
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect()
        })
        .collect();
    let true_index = match assigns.iter().position(|a| a == truth_assign) {
        Some(i) => i,
        None => {
            let last = assigns.len() - 1;
            assigns[last] = truth_assign.to_vec();
            last
        }
    };
    let models = assigns.iter().map(|a| build(a)).collect::<Result<Vec<_>>>()?;
    ModelClass::new(models, true_index)
}

/// The true model plus `count − 1` perturbed copies. Each copy multiplies
/// every on-support entry by `1 + spread·u`, `u ~ U[−1, 1]`, renormalizes,
/// and mixes in the floor `p_min`. The true model is at index 0.
pub fn perturbations_of_true(
    truth: &EpisodicMdp,
    count: usize,
    p_min: f64,
    spread: f64,
    seeds: &SeedTree,
) -> Result<ModelClass> {
    if count == 0 {
        return Err(Error::InvalidParameter("class count must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&spread) {
        return Err(Error::InvalidParameter(format!("spread must lie in [0, 1), got {spread}")));
    }
    let (s, na, horizon) = (truth.num_states(), truth.num_actions(), truth.horizon());
    check_p_min(p_min, s)?;
    let mut models = vec![truth.clone()];
    for k in 1..count {
        let mut rng = seeds.child(Purpose::ModelClass, k as u64).rng();
        let mut flat = Vec::with_capacity(horizon * s * na * s);
        for h in 0..horizon {
            for x in 0..s {
                for a in 0..na {
                    let raw: Vec<f64> = truth
                        .row(h, x, a)
                        .iter()
                        .map(|&p| {
                            let u: f64 = rng.random_range(-1.0..=1.0);
                            if p > 0.0 {
                                p * (1.0 + spread * u)
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    flat.extend(mix_floor(&raw, p_min));
                }
            }
        }
        let mut m = EpisodicMdp::from_flat(s, na, horizon, flat, truth.rewards_flat().to_vec(), truth.initial_state())?;
        if let Some(d) = truth.initial_distribution() {
            m = m.with_initial_distribution(d.to_vec())?;
        }
        models.push(m);
    }
    ModelClass::new(models, 0)
}
