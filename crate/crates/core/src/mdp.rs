//! Finite-horizon tabular MDPs, exact planning and Bellman errors.
//!
//! Stages are 0-based throughout the crate: `h` runs over `0..horizon` and
//! `V^{H}` (one past the last stage) is identically zero.

use serde::{Deserialize, Serialize};

use crate::divergence::validate_row;
use crate::error::{Error, Result};

/// Tolerance used when checking that every trajectory's return lies in `[0, 1]`.
const RETURN_TOLERANCE: f64 = 1e-9;

/// Episodic MDP with known rewards and stage-dependent transitions.
///
/// Transitions are stored dense in `[h][x][a][x']` order, rewards in
/// `[h][x][a]` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodicMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    initial_state: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_distribution: Option<Vec<f64>>,
}

impl EpisodicMdp {
    /// Builds and validates an MDP.
    ///
    /// `transitions[h][x][a]` is the next-state row and `rewards[h][x][a]` the
    /// reward at stage `h`.
    pub fn new(
        transitions: Vec<Vec<Vec<Vec<f64>>>>,
        rewards: Vec<Vec<Vec<f64>>>,
        initial_state: usize,
    ) -> Result<Self> {
        let horizon = transitions.len();
        if horizon == 0 || rewards.len() != horizon {
            return Err(Error::DimensionMismatch(format!(
                "{} transition stages vs {} reward stages",
                horizon,
                rewards.len()
            )));
        }
        let num_states = transitions[0].len();
        let num_actions = transitions[0].first().map_or(0, |r| r.len());
        if num_states == 0 || num_actions == 0 {
            return Err(Error::DimensionMismatch("empty state or action set".into()));
        }
        let mut flat_p = Vec::with_capacity(horizon * num_states * num_actions * num_states);
        let mut flat_r = Vec::with_capacity(horizon * num_states * num_actions);
        for h in 0..horizon {
            if transitions[h].len() != num_states || rewards[h].len() != num_states {
                return Err(Error::DimensionMismatch(format!("stage {h} state count")));
            }
            for x in 0..num_states {
                if transitions[h][x].len() != num_actions || rewards[h][x].len() != num_actions {
                    return Err(Error::DimensionMismatch(format!("stage {h} state {x} action count")));
                }
                for a in 0..num_actions {
                    let row = &transitions[h][x][a];
                    if row.len() != num_states {
                        return Err(Error::DimensionMismatch(format!(
                            "row ({h},{x},{a}) has length {}",
                            row.len()
                        )));
                    }
                    flat_p.extend_from_slice(row);
                    flat_r.push(rewards[h][x][a]);
                }
            }
        }
        Self::from_flat(num_states, num_actions, horizon, flat_p, flat_r, initial_state)
    }

    /// Builds an MDP from flat `[h][x][a][x']` transitions and `[h][x][a]` rewards.
    pub fn from_flat(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial_state: usize,
    ) -> Result<Self> {
        let mdp = EpisodicMdp {
            num_states,
            num_actions,
            horizon,
            transitions,
            rewards,
            initial_state,
            initial_distribution: None,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Replaces the fixed initial state by a distribution over start states.
    pub fn with_initial_distribution(mut self, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != self.num_states {
            return Err(Error::DimensionMismatch("initial distribution length".into()));
        }
        validate_row(&dist, "initial distribution")?;
        self.initial_distribution = Some(dist);
        Ok(self)
    }

    /// Checks shapes, row normalization and the `[0, 1]` return range.
    pub fn validate(&self) -> Result<()> {
        let (s, a, h) = (self.num_states, self.num_actions, self.horizon);
        if s == 0 || a == 0 || h == 0 {
            return Err(Error::DimensionMismatch("empty dimension".into()));
        }
        if self.transitions.len() != h * s * a * s || self.rewards.len() != h * s * a {
            return Err(Error::DimensionMismatch("flat table length".into()));
        }
        if self.initial_state >= s {
            return Err(Error::DimensionMismatch(format!(
                "initial state {} out of range",
                self.initial_state
            )));
        }
        if let Some(d) = &self.initial_distribution {
            if d.len() != s {
                return Err(Error::DimensionMismatch("initial distribution length".into()));
            }
            validate_row(d, "initial distribution")?;
        }
        for stage in 0..h {
            for x in 0..s {
                for act in 0..a {
                    validate_row(self.row(stage, x, act), &format!("({stage},{x},{act})"))?;
                    let r = self.reward(stage, x, act);
                    if !r.is_finite() {
                        return Err(Error::RewardRange(format!("non-finite reward at ({stage},{x},{act})")));
                    }
                }
            }
        }
        // Every trajectory return must lie in [0, 1]: check the extreme returns
        // over all action sequences through reachable transitions.
        let (lo, hi) = self.return_range();
        if lo < -RETURN_TOLERANCE || hi > 1.0 + RETURN_TOLERANCE {
            return Err(Error::RewardRange(format!(
                "trajectory returns span [{lo}, {hi}], expected within [0, 1]"
            )));
        }
        Ok(())
    }

    /// Minimum and maximum return over all trajectories with positive probability
    /// under some action sequence, from any state at stage 0.
    fn return_range(&self) -> (f64, f64) {
        let s = self.num_states;
        let mut lo = vec![0.0; s];
        let mut hi = vec![0.0; s];
        for h in (0..self.horizon).rev() {
            let mut nlo = vec![f64::INFINITY; s];
            let mut nhi = vec![f64::NEG_INFINITY; s];
            for x in 0..s {
                for a in 0..self.num_actions {
                    let row = self.row(h, x, a);
                    let r = self.reward(h, x, a);
                    let (mut l, mut u) = (f64::INFINITY, f64::NEG_INFINITY);
                    for (y, &p) in row.iter().enumerate() {
                        if p > 0.0 {
                            l = l.min(lo[y]);
                            u = u.max(hi[y]);
                        }
                    }
                    nlo[x] = nlo[x].min(r + l);
                    nhi[x] = nhi[x].max(r + u);
                }
            }
            lo = nlo;
            hi = nhi;
        }
        let lo_min = lo.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi_max = hi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo_min, hi_max)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn initial_distribution(&self) -> Option<&[f64]> {
        self.initial_distribution.as_deref()
    }

    #[inline]
    fn row_offset(&self, h: usize, x: usize, a: usize) -> usize {
        ((h * self.num_states + x) * self.num_actions + a) * self.num_states
    }

    /// Next-state distribution `P^h(. | x, a)`.
    #[inline]
    pub fn row(&self, h: usize, x: usize, a: usize) -> &[f64] {
        let o = self.row_offset(h, x, a);
        &self.transitions[o..o + self.num_states]
    }

    #[inline]
    pub fn reward(&self, h: usize, x: usize, a: usize) -> f64 {
        self.rewards[(h * self.num_states + x) * self.num_actions + a]
    }

    pub fn rewards_flat(&self) -> &[f64] {
        &self.rewards
    }

    pub fn same_shape(&self, other: &EpisodicMdp) -> bool {
        self.num_states == other.num_states
            && self.num_actions == other.num_actions
            && self.horizon == other.horizon
    }

    /// `Σ_{x'} P^h(x'|x,a) v(x')`.
    #[inline]
    pub fn expect(&self, h: usize, x: usize, a: usize, v: &[f64]) -> f64 {
        self.row(h, x, a).iter().zip(v).map(|(p, v)| p * v).sum()
    }

    /// Start-state distribution as a dense vector.
    pub fn start_distribution(&self) -> Vec<f64> {
        match &self.initial_distribution {
            Some(d) => d.clone(),
            None => {
                let mut d = vec![0.0; self.num_states];
                d[self.initial_state] = 1.0;
                d
            }
        }
    }
}

/// Deterministic Markov policy: `actions[h][x]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    actions: Vec<Vec<usize>>,
}

impl Policy {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        Policy { actions }
    }

    /// The policy that plays `action` everywhere.
    pub fn constant(horizon: usize, num_states: usize, action: usize) -> Self {
        Policy {
            actions: vec![vec![action; num_states]; horizon],
        }
    }

    #[inline]
    pub fn action(&self, h: usize, x: usize) -> usize {
        self.actions[h][x]
    }

    pub fn set_action(&mut self, h: usize, x: usize, a: usize) {
        self.actions[h][x] = a;
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[Vec<usize>] {
        &self.actions
    }

    /// Checks the policy is defined with valid actions for every stage and state of `mdp`.
    pub fn check_against(&self, mdp: &EpisodicMdp) -> Result<()> {
        if self.actions.len() != mdp.horizon() {
            return Err(Error::DimensionMismatch(format!(
                "policy horizon {} vs model horizon {}",
                self.actions.len(),
                mdp.horizon()
            )));
        }
        for (h, row) in self.actions.iter().enumerate() {
            if row.len() != mdp.num_states() {
                return Err(Error::DimensionMismatch(format!("policy stage {h} covers {} states", row.len())));
            }
            if let Some(&a) = row.iter().find(|&&a| a >= mdp.num_actions()) {
                return Err(Error::DimensionMismatch(format!("policy action {a} out of range at stage {h}")));
            }
        }
        Ok(())
    }
}

/// Stochastic Markov policy used to collect offline data: `probs[h][x][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    probs: Vec<Vec<Vec<f64>>>,
}

impl StochasticPolicy {
    pub fn new(probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for (h, stage) in probs.iter().enumerate() {
            for (x, row) in stage.iter().enumerate() {
                validate_row(row, &format!("behavior policy ({h},{x})"))?;
            }
        }
        Ok(StochasticPolicy { probs })
    }

    pub fn probs(&self, h: usize, x: usize) -> &[f64] {
        &self.probs[h][x]
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn check_against(&self, mdp: &EpisodicMdp) -> Result<()> {
        if self.probs.len() != mdp.horizon()
            || self
                .probs
                .iter()
                .any(|s| s.len() != mdp.num_states() || s.iter().any(|r| r.len() != mdp.num_actions()))
        {
            return Err(Error::DimensionMismatch("behavior policy shape".into()));
        }
        Ok(())
    }
}

impl From<&Policy> for StochasticPolicy {
    fn from(p: &Policy) -> Self {
        let num_actions = p.actions.iter().flatten().copied().max().unwrap_or(0) + 1;
        let probs = p
            .actions
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|&a| {
                        let mut row = vec![0.0; num_actions];
                        row[a] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        StochasticPolicy { probs }
    }
}

/// A policy that can pick an action given a uniform draw in `[0, 1)`.
pub trait ActionRule: Sync {
    fn choose(&self, h: usize, x: usize, u: f64) -> usize;
    fn check_against(&self, mdp: &EpisodicMdp) -> Result<()>;
}

impl ActionRule for Policy {
    #[inline]
    fn choose(&self, h: usize, x: usize, _u: f64) -> usize {
        self.action(h, x)
    }

    fn check_against(&self, mdp: &EpisodicMdp) -> Result<()> {
        Policy::check_against(self, mdp)
    }
}

impl ActionRule for StochasticPolicy {
    fn choose(&self, h: usize, x: usize, u: f64) -> usize {
        sample_index(self.probs(h, x), u)
    }

    fn check_against(&self, mdp: &EpisodicMdp) -> Result<()> {
        StochasticPolicy::check_against(self, mdp)
    }
}

/// Inverse-CDF sampling from a probability row, never returning a zero-mass index.
pub fn sample_index(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Per-stage Q and V tables; `v` has `horizon + 1` entries with the last one zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub q: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    num_actions: usize,
}

impl ValueTables {
    #[inline]
    pub fn q(&self, h: usize, x: usize, a: usize) -> f64 {
        self.q[h][x * self.num_actions + a]
    }

    #[inline]
    pub fn v(&self, h: usize, x: usize) -> f64 {
        self.v[h][x]
    }

    /// Value of the start distribution at stage 0.
    pub fn start_value(&self, mdp: &EpisodicMdp) -> f64 {
        match mdp.initial_distribution() {
            Some(d) => d.iter().zip(&self.v[0]).map(|(p, v)| p * v).sum(),
            None => self.v[0][mdp.initial_state()],
        }
    }
}

/// Which policy to evaluate in [`value_functions`].
#[derive(Debug, Clone, Copy)]
pub enum Evaluate<'a> {
    Greedy,
    Policy(&'a Policy),
}

/// Exact finite-horizon dynamic programming.
pub fn value_functions(model: &EpisodicMdp, which: Evaluate<'_>) -> Result<ValueTables> {
    if let Evaluate::Policy(p) = which {
        p.check_against(model)?;
    }
    let (s, na, hz) = (model.num_states(), model.num_actions(), model.horizon());
    let mut q = vec![vec![0.0; s * na]; hz];
    let mut v = vec![vec![0.0; s]; hz + 1];
    for h in (0..hz).rev() {
        let (head, tail) = v.split_at_mut(h + 1);
        let next = &tail[0];
        let cur = &mut head[h];
        for x in 0..s {
            for a in 0..na {
                q[h][x * na + a] = model.reward(h, x, a) + model.expect(h, x, a, next);
            }
            cur[x] = match which {
                Evaluate::Greedy => q[h][x * na..(x + 1) * na]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max),
                Evaluate::Policy(p) => q[h][x * na + p.action(h, x)],
            };
        }
    }
    Ok(ValueTables { q, v, num_actions: na })
}

/// Greedy policy of the optimal Q-function, ties to the lowest action index.
pub fn greedy_policy(model: &EpisodicMdp) -> Policy {
    let vt = value_functions(model, Evaluate::Greedy).expect("greedy evaluation has no policy to mismatch");
    greedy_from_values(model, &vt)
}

pub(crate) fn greedy_from_values(model: &EpisodicMdp, vt: &ValueTables) -> Policy {
    let (s, na) = (model.num_states(), model.num_actions());
    let actions = (0..model.horizon())
        .map(|h| {
            (0..s)
                .map(|x| {
                    let row = &vt.q[h][x * na..(x + 1) * na];
                    let mut best = 0;
                    for a in 1..na {
                        if row[a] > row[best] {
                            best = a;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();
    Policy::new(actions)
}

/// Start-state value of `policy` in `model`.
pub fn policy_value(model: &EpisodicMdp, policy: &Policy) -> Result<f64> {
    Ok(value_functions(model, Evaluate::Policy(policy))?.start_value(model))
}

/// Optimal start-state value of `model`.
pub fn optimal_value(model: &EpisodicMdp) -> f64 {
    value_functions(model, Evaluate::Greedy)
        .expect("greedy evaluation cannot fail")
        .start_value(model)
}

/// Model-based Bellman error `E^M[V_M^{h+1}|x,a] − E^*[V_M^{h+1}|x,a]`, with
/// `V_M` the optimal value of `model`.
pub fn bellman_error(model: &EpisodicMdp, true_model: &EpisodicMdp, h: usize, x: usize, a: usize) -> Result<f64> {
    let vt = value_functions(model, Evaluate::Greedy)?;
    bellman_error_with(model, true_model, &vt, h, x, a)
}

/// [`bellman_error`] with precomputed values of `model`.
pub fn bellman_error_with(
    model: &EpisodicMdp,
    true_model: &EpisodicMdp,
    values: &ValueTables,
    h: usize,
    x: usize,
    a: usize,
) -> Result<f64> {
    if !model.same_shape(true_model) {
        return Err(Error::DimensionMismatch("bellman error on differently shaped models".into()));
    }
    let next = &values.v[h + 1];
    Ok(model.expect(h, x, a, next) - true_model.expect(h, x, a, next))
}

/// State-action occupancy `d^h(x,a)` of `policy` in `model` from its start distribution.
pub fn occupancy(model: &EpisodicMdp, policy: &Policy) -> Result<Vec<Vec<f64>>> {
    policy.check_against(model)?;
    let (s, na) = (model.num_states(), model.num_actions());
    let mut state_dist = model.start_distribution();
    let mut out = Vec::with_capacity(model.horizon());
    for h in 0..model.horizon() {
        let mut d = vec![0.0; s * na];
        let mut next = vec![0.0; s];
        for x in 0..s {
            let mass = state_dist[x];
            if mass == 0.0 {
                continue;
            }
            let a = policy.action(h, x);
            d[x * na + a] = mass;
            for (y, p) in model.row(h, x, a).iter().enumerate() {
                next[y] += mass * p;
            }
        }
        out.push(d);
        state_dist = next;
    }
    Ok(out)
}

/// One step of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// An `H`-step trajectory collected in episode `episode`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn pair(&self, h: usize) -> (usize, usize) {
        (self.steps[h].state, self.steps[h].action)
    }
}

/// An observed transition `(t, h, x, a, x')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub t: usize,
    pub h: usize,
    pub x: usize,
    pub a: usize,
    pub next: usize,
}

impl Trajectory {
    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.steps.iter().enumerate().map(move |(h, s)| Transition {
            t: self.episode,
            h,
            x: s.state,
            a: s.action,
            next: s.next_state,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(h: usize, reward: f64) -> EpisodicMdp {
        let p = vec![vec![vec![vec![0.5, 0.5]; 2]; 2]; h];
        let r = vec![vec![vec![reward; 2]; 2]; h];
        EpisodicMdp::new(p, r, 0).unwrap()
    }

    #[test]
    fn single_stage_value_is_reward() {
        let m = two_state(1, 0.3);
        let vt = value_functions(&m, Evaluate::Greedy).unwrap();
        assert_eq!(vt.v(0, 0), 0.3);
        assert_eq!(vt.v(0, 1), 0.3);
        assert!(vt.v[1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dominant_action_and_ties() {
        // action 0 gets 0.2, action 1 gets 0.1 at every stage of a 2-step MDP
        let p = vec![vec![vec![vec![1.0, 0.0], vec![1.0, 0.0]]; 2]; 2];
        let r = vec![vec![vec![0.2, 0.1]; 2]; 2];
        let m = EpisodicMdp::new(p.clone(), r, 0).unwrap();
        assert_eq!(greedy_policy(&m), Policy::constant(2, 2, 0));

        let tie = EpisodicMdp::new(p, vec![vec![vec![0.25, 0.25]; 2]; 2], 0).unwrap();
        assert_eq!(greedy_policy(&tie), Policy::constant(2, 2, 0));
    }

    #[test]
    fn rejects_bad_rows_and_rewards() {
        let p = vec![vec![vec![vec![0.6, 0.6]]]];
        assert!(matches!(
            EpisodicMdp::new(p, vec![vec![vec![0.0]]], 0),
            Err(Error::DimensionMismatch(_)) | Err(Error::NotARow { .. })
        ));
        let p = vec![vec![vec![vec![1.0]]]; 2];
        let r = vec![vec![vec![0.6]]; 2];
        assert!(matches!(EpisodicMdp::new(p, r, 0), Err(Error::RewardRange(_))));
    }

    #[test]
    fn policy_dimension_mismatch() {
        let m = two_state(2, 0.1);
        let bad = Policy::constant(3, 2, 0);
        assert!(matches!(
            value_functions(&m, Evaluate::Policy(&bad)),
            Err(Error::DimensionMismatch(_))
        ));
        let bad_action = Policy::constant(2, 2, 5);
        assert!(value_functions(&m, Evaluate::Policy(&bad_action)).is_err());
    }

    #[test]
    fn bellman_error_zero_against_itself() {
        let m = two_state(3, 0.1);
        for h in 0..3 {
            for x in 0..2 {
                for a in 0..2 {
                    assert_eq!(bellman_error(&m, &m, h, x, a).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn bellman_error_two_state_hand_expansion() {
        // Reward 1 only in state 1 at the last stage.
        let r = vec![vec![vec![0.0; 2]; 2], vec![vec![0.0; 2], vec![1.0; 2]]];
        let pm = vec![vec![vec![vec![0.2, 0.8]; 2]; 2]; 2];
        let ps = vec![vec![vec![vec![0.7, 0.3]; 2]; 2]; 2];
        let model = EpisodicMdp::new(pm, r.clone(), 0).unwrap();
        let truth = EpisodicMdp::new(ps, r, 0).unwrap();
        // V_M^1 = (0, 1); E^M = 0.8, E^* = 0.3.
        let e = bellman_error(&model, &truth, 0, 0, 1).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
        // last stage: V^{H} = 0
        assert_eq!(bellman_error(&model, &truth, 1, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn occupancy_sums_to_one() {
        let m = two_state(3, 0.1);
        let occ = occupancy(&m, &Policy::constant(3, 2, 1)).unwrap();
        for d in occ {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_index_skips_zero_mass() {
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(sample_index(&[0.5, 0.5, 0.0], 0.999_999), 1);
        assert_eq!(sample_index(&[0.25, 0.75], 0.3), 1);
    }
}
