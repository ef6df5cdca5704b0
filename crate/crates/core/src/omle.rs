//! Online learner: optimistic maximum likelihood with uncertainty weights.

use serde::{Deserialize, Serialize};

use crate::corruption::{Adversary, CorruptionLedger};
use crate::error::{Error, Result};
use crate::mdp::{Policy, Trajectory};
use crate::model_class::{ModelClass, PairwiseTv, PlanningCache};
use crate::params::Params;
use crate::rng::SeedTree;
use crate::simulate::{episode_initial_state, simulate_episode_logged};
use crate::uncertainty::{online_weight, HistoryBuffer, WeightTable};

/// How per-sample weights are set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `σ_t^h = max{1, U_t/α}`.
    Uncertainty,
    /// `σ ≡ 1` (plain optimistic MLE).
    Unweighted,
}

/// Weights and uncertainties computed in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundUpdate {
    pub uncertainty: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Incremental state of the online learner over a fixed model class.
///
/// Tie-breaking in every argmax is by lowest model index. Before any data the
/// reference model is the lowest index (the argmax of an empty sum).
#[derive(Debug, Clone)]
pub struct OmleLearner<'a> {
    class: &'a ModelClass,
    tv: PairwiseTv,
    cache: PlanningCache,
    params: Params,
    weighting: Weighting,
    confidence: Vec<usize>,
    reference: usize,
    history: HistoryBuffer,
    weights: WeightTable,
    /// `Σ_{s: z_s^h = z} 1/σ_s^h`, indexed `[h][x·A + a]`.
    inv_sigma: Vec<Vec<f64>>,
    /// Per-stage weighted log-likelihoods, indexed `[model][h]`.
    log_lik: Vec<Vec<f64>>,
}

impl<'a> OmleLearner<'a> {
    pub fn new(class: &'a ModelClass, params: Params, weighting: Weighting) -> Result<Self> {
        let horizon = class.horizon();
        let cells = class.num_states() * class.num_actions();
        Ok(OmleLearner {
            class,
            tv: class.pairwise_tv(),
            cache: class.planning_cache(),
            params,
            weighting,
            confidence: (0..class.len()).collect(),
            reference: 0,
            history: HistoryBuffer::new(horizon),
            weights: WeightTable::new(horizon, params.alpha, params.lambda)?,
            inv_sigma: vec![vec![0.0; cells]; horizon],
            log_lik: vec![vec![0.0; horizon]; class.len()],
        })
    }

    /// `argmax_{M ∈ M_t} V_M(x1)`.
    pub fn select_optimistic_model(&self, x1: usize) -> usize {
        let mut best = self.confidence[0];
        for &m in &self.confidence[1..] {
            if self.cache.value_at(m, x1) > self.cache.value_at(best, x1) {
                best = m;
            }
        }
        best
    }

    /// Greedy policy of model `m`.
    pub fn policy(&self, m: usize) -> &Policy {
        &self.cache.policies[m]
    }

    pub fn planning(&self) -> &PlanningCache {
        &self.cache
    }

    pub fn confidence_set(&self) -> &[usize] {
        &self.confidence
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Per-stage weighted log-likelihood of model `m` on the data so far.
    pub fn log_likelihood(&self, m: usize) -> &[f64] {
        &self.log_lik[m]
    }

    /// `U_t(z) = min{1, sup_{M ∈ M_t} l(z) / √(λ + Σ_{s<t} l(z_s)²/σ_s)}` with
    /// `l = TV(P_M^h ‖ P_{M̄_t}^h)`.
    pub fn uncertainty(&self, h: usize, x: usize, a: usize) -> f64 {
        let na = self.class.num_actions();
        let cell = x * na + a;
        let inv = &self.inv_sigma[h];
        let mut best: f64 = 0.0;
        for &m in &self.confidence {
            let slice = self.tv.stage_slice(m, self.reference, h);
            let num = slice[cell];
            if num == 0.0 {
                continue;
            }
            let mut den = self.params.lambda;
            for (w, l) in inv.iter().zip(slice) {
                if *w > 0.0 {
                    den += w * l * l;
                }
            }
            best = best.max(num / den.sqrt());
        }
        best.min(1.0)
    }

    /// Weights the new trajectory, refits the reference model over `M_t` and
    /// shrinks the confidence set.
    pub fn update_round(&mut self, trajectory: &Trajectory) -> Result<RoundUpdate> {
        let horizon = self.class.horizon();
        if trajectory.steps.len() != horizon {
            return Err(Error::DimensionMismatch("trajectory length".into()));
        }
        let na = self.class.num_actions();
        let mut uncertainty = Vec::with_capacity(horizon);
        let mut sigma = Vec::with_capacity(horizon);
        for (h, step) in trajectory.steps.iter().enumerate() {
            let u = self.uncertainty(h, step.state, step.action);
            let s = match self.weighting {
                Weighting::Uncertainty => online_weight(u, self.params.alpha),
                Weighting::Unweighted => 1.0,
            };
            uncertainty.push(u);
            sigma.push(s);
        }
        let pairs: Vec<(usize, usize)> = (0..horizon).map(|h| trajectory.pair(h)).collect();
        self.history.push_episode(&pairs, &sigma)?;
        self.weights.push_episode(&sigma)?;
        for (h, step) in trajectory.steps.iter().enumerate() {
            self.inv_sigma[h][step.state * na + step.action] += 1.0 / sigma[h];
            for (m, ll) in self.log_lik.iter_mut().enumerate() {
                let p = self.class.model(m).row(h, step.state, step.action)[step.next_state];
                if p <= 0.0 {
                    return Err(Error::ZeroLikelihood { model: m, h });
                }
                ll[h] += p.ln() / sigma[h];
            }
        }
        let total = |m: usize| self.log_lik[m].iter().sum::<f64>();
        let mut reference = self.confidence[0];
        let mut best = total(reference);
        for &m in &self.confidence[1..] {
            let v = total(m);
            if v > best {
                best = v;
                reference = m;
            }
        }
        let beta_sq = self.params.beta_sq();
        let bar = &self.log_lik[reference];
        let next: Vec<usize> = self
            .confidence
            .iter()
            .copied()
            .filter(|&m| self.log_lik[m].iter().zip(bar).all(|(l, b)| *l >= b - beta_sq))
            .collect();
        if next.is_empty() {
            return Err(Error::EmptyConfidenceSet(self.weights.episodes()));
        }
        self.reference = reference;
        self.confidence = next;
        Ok(RoundUpdate { uncertainty, sigma })
    }
}

/// Per-round output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub t: usize,
    pub regret_inc: f64,
    pub regret_cum: f64,
    /// `max_h Σ_{s≤t} c_s^h`.
    pub c_realized_max_stage: f64,
    /// `|M_{t+1}|`.
    pub conf_set_size: usize,
    /// `max_h σ_t^h`.
    pub max_sigma: f64,
}

/// Full trace of one round, for replay checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub t: usize,
    pub x1: usize,
    pub optimistic: usize,
    /// `M̄_t` and `M_t`, as used for this round's weights.
    pub reference_before: usize,
    pub confidence_before: Vec<usize>,
    pub trajectory: Trajectory,
    pub update: RoundUpdate,
    /// `M̄_{t+1}` and `M_{t+1}`.
    pub reference_after: usize,
    pub confidence_after: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OnlineOptions {
    pub episodes: usize,
    pub record_rounds: bool,
    pub keep_ledger_rows: bool,
}

/// Result of [`run_online`].
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineRun {
    pub rounds: Vec<RoundRecord>,
    pub logs: Vec<RoundLog>,
    pub ledger: CorruptionLedger,
    pub params: Params,
    /// Whether `M*` stayed in every confidence set `M_1, …, M_{T+1}`.
    pub truth_always_in_set: bool,
    pub final_confidence_set: Vec<usize>,
    pub final_reference: usize,
}

/// Plays `options.episodes` rounds of the online learner against the true
/// model of `class` and `adversary`. Regret is measured by exact dynamic
/// programming in the true model.
pub fn run_online(
    class: &ModelClass,
    adversary: &mut Adversary,
    params: Params,
    weighting: Weighting,
    options: OnlineOptions,
    seeds: &SeedTree,
) -> Result<OnlineRun> {
    let mut learner = OmleLearner::new(class, params, weighting)?;
    let truth = class.true_model();
    let mut ledger = if options.keep_ledger_rows {
        CorruptionLedger::with_rows(class.horizon())
    } else {
        CorruptionLedger::new(class.horizon())
    };
    let mut rounds = Vec::with_capacity(options.episodes);
    let mut logs = Vec::new();
    let mut truth_always_in_set = true;
    let mut cum = 0.0;
    for t in 0..options.episodes {
        let x1 = episode_initial_state(truth, seeds, t);
        let optimistic = learner.select_optimistic_model(x1);
        let reference_before = learner.reference();
        let confidence_before = options.record_rounds.then(|| learner.confidence_set().to_vec());
        let (trajectory, _) =
            simulate_episode_logged(truth, learner.policy(optimistic), adversary, seeds, t, Some(&mut ledger))?;
        let regret_inc = learner.planning().regret_at(optimistic, x1);
        let update = learner.update_round(&trajectory)?;
        cum += regret_inc;
        truth_always_in_set &= learner.confidence_set().contains(&class.true_index());
        rounds.push(RoundRecord {
            t: t + 1,
            regret_inc,
            regret_cum: cum,
            c_realized_max_stage: ledger.max_stage_total(),
            conf_set_size: learner.confidence_set().len(),
            max_sigma: update.sigma.iter().cloned().fold(1.0, f64::max),
        });
        if let Some(confidence_before) = confidence_before {
            logs.push(RoundLog {
                t: t + 1,
                x1,
                optimistic,
                reference_before,
                confidence_before,
                trajectory,
                update,
                reference_after: learner.reference(),
                confidence_after: learner.confidence_set().to_vec(),
            });
        }
    }
    Ok(OnlineRun {
        rounds,
        logs,
        ledger,
        params,
        truth_always_in_set,
        final_confidence_set: learner.confidence_set().to_vec(),
        final_reference: learner.reference(),
    })
}
