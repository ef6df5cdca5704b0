use serde::{Deserialize, Serialize};

use crate::divergence::{ratio_bound, tv};
use crate::error::{Error, Result};
use crate::mdp::{greedy_from_values, value_functions, EpisodicMdp, Evaluate, Policy, ValueTables};

/// A finite set of candidate transition models sharing dimensions and rewards,
/// one of which is the true model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelClassFile", into = "ModelClassFile")]
pub struct ModelClass {
    models: Vec<EpisodicMdp>,
    true_index: usize,
    ratio_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelClassFile {
    true_index: usize,
    models: Vec<EpisodicMdp>,
}

impl TryFrom<ModelClassFile> for ModelClass {
    type Error = Error;

    fn try_from(f: ModelClassFile) -> Result<Self> {
        ModelClass::new(f.models, f.true_index)
    }
}

impl From<ModelClass> for ModelClassFile {
    fn from(c: ModelClass) -> Self {
        ModelClassFile {
            true_index: c.true_index,
            models: c.models,
        }
    }
}

impl ModelClass {
    /// Validates the class invariants and computes the ratio bound `B`.
    pub fn new(models: Vec<EpisodicMdp>, true_index: usize) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::EmptyModelSet);
        }
        if true_index >= models.len() {
            return Err(Error::InvalidParameter(format!(
                "true index {true_index} outside class of size {}",
                models.len()
            )));
        }
        let truth = &models[true_index];
        for (i, m) in models.iter().enumerate() {
            m.validate()?;
            if !m.same_shape(truth) {
                return Err(Error::DimensionMismatch(format!("model {i} has a different shape")));
            }
            if m.rewards_flat() != truth.rewards_flat() {
                return Err(Error::DimensionMismatch(format!("model {i} has different rewards")));
            }
            if m.start_distribution() != truth.start_distribution() {
                return Err(Error::DimensionMismatch(format!("model {i} has a different start distribution")));
            }
        }
        let ratio_bound = ratio_bound(&models, true_index)?;
        Ok(ModelClass {
            models,
            true_index,
            ratio_bound,
        })
    }

    /// The singleton class `{M*}`.
    pub fn singleton(truth: EpisodicMdp) -> Self {
        ModelClass::new(vec![truth], 0).expect("a validated model is a valid singleton class")
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[EpisodicMdp] {
        &self.models
    }

    pub fn model(&self, i: usize) -> &EpisodicMdp {
        &self.models[i]
    }

    pub fn true_index(&self) -> usize {
        self.true_index
    }

    pub fn true_model(&self) -> &EpisodicMdp {
        &self.models[self.true_index]
    }

    /// Assumption constant `B`.
    pub fn ratio_bound(&self) -> f64 {
        self.ratio_bound
    }

    pub fn num_states(&self) -> usize {
        self.true_model().num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.true_model().num_actions()
    }

    pub fn horizon(&self) -> usize {
        self.true_model().horizon()
    }

    /// Dense table of pairwise TV distances, see [`PairwiseTv`].
    pub fn pairwise_tv(&self) -> PairwiseTv {
        PairwiseTv::new(self)
    }

    /// Greedy values and policies of every model, plus each greedy policy's
    /// value under the true model.
    pub fn planning_cache(&self) -> PlanningCache {
        PlanningCache::new(self)
    }
}

/// `TV(P_i^h(.|x,a) ‖ P_j^h(.|x,a))` for every model pair and every `(h, x, a)`.
#[derive(Debug, Clone)]
pub struct PairwiseTv {
    n: usize,
    cells: usize,
    num_actions: usize,
    states_actions: usize,
    data: Vec<f64>,
}

impl PairwiseTv {
    fn new(class: &ModelClass) -> Self {
        let n = class.len();
        let (s, a, h) = (class.num_states(), class.num_actions(), class.horizon());
        let cells = h * s * a;
        let mut data = vec![0.0; n * n * cells];
        for i in 0..n {
            for j in (i + 1)..n {
                let (mi, mj) = (class.model(i), class.model(j));
                for stage in 0..h {
                    for x in 0..s {
                        for act in 0..a {
                            let d = tv(mi.row(stage, x, act), mj.row(stage, x, act)).min(1.0);
                            let c = (stage * s + x) * a + act;
                            data[(i * n + j) * cells + c] = d;
                            data[(j * n + i) * cells + c] = d;
                        }
                    }
                }
            }
        }
        PairwiseTv {
            n,
            cells,
            num_actions: a,
            states_actions: s * a,
            data,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, h: usize, x: usize, a: usize) -> f64 {
        self.data[(i * self.n + j) * self.cells + h * self.states_actions + x * self.num_actions + a]
    }

    /// The `S·A` slice of stage `h` for the pair `(i, j)`, indexed by `x·A + a`.
    #[inline]
    pub fn stage_slice(&self, i: usize, j: usize, h: usize) -> &[f64] {
        let o = (i * self.n + j) * self.cells + h * self.states_actions;
        &self.data[o..o + self.states_actions]
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn states_actions(&self) -> usize {
        self.states_actions
    }
}

/// Per-model planning results that never change during a run.
#[derive(Debug, Clone)]
pub struct PlanningCache {
    pub values: Vec<ValueTables>,
    pub policies: Vec<Policy>,
    /// Stage-0 values `V_{π_M, *}(x)` of each model's greedy policy in the
    /// true model, per model and state.
    pub true_policy_values: Vec<Vec<f64>>,
    /// Stage-0 optimal values `V_*(x)` of the true model.
    pub optimal_true_values: Vec<f64>,
}

impl PlanningCache {
    fn new(class: &ModelClass) -> Self {
        let truth = class.true_model();
        let values: Vec<ValueTables> = class
            .models()
            .iter()
            .map(|m| value_functions(m, Evaluate::Greedy).expect("greedy evaluation cannot fail"))
            .collect();
        let policies: Vec<Policy> = class
            .models()
            .iter()
            .zip(&values)
            .map(|(m, v)| greedy_from_values(m, v))
            .collect();
        let true_policy_values = policies
            .iter()
            .map(|p| {
                value_functions(truth, Evaluate::Policy(p))
                    .expect("policies share the class dimensions")
                    .v[0]
                    .clone()
            })
            .collect();
        let optimal_true_values = values[class.true_index()].v[0].clone();
        PlanningCache {
            values,
            policies,
            true_policy_values,
            optimal_true_values,
        }
    }

    /// Optimal value of model `i` at stage 0 in state `x`.
    pub fn value_at(&self, i: usize, x: usize) -> f64 {
        self.values[i].v(0, x)
    }

    /// `V_*(x) − V_{π_M,*}(x)` at stage 0 for model `i`'s greedy policy.
    pub fn regret_at(&self, i: usize, x: usize) -> f64 {
        self.optimal_true_values[x] - self.true_policy_values[i][x]
    }
}
