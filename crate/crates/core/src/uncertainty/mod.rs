//! Information ratios, uncertainty weights and complexity measures.

pub mod coverage;
pub mod eluder;
pub mod linear;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_class::PairwiseTv;

/// Per-`(t, h)` uncertainty weights `σ_t^h ≥ 1` together with `α` and `λ`.
///
/// `alpha = +∞` is allowed and means every weight is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    horizon: usize,
    alpha: f64,
    lambda: f64,
    sigma: Vec<f64>,
}

impl WeightTable {
    /// An empty table (zero episodes).
    pub fn new(horizon: usize, alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        Ok(WeightTable {
            horizon,
            alpha,
            lambda,
            sigma: Vec::new(),
        })
    }

    /// `episodes × horizon` table of ones.
    pub fn ones(episodes: usize, horizon: usize, alpha: f64, lambda: f64) -> Result<Self> {
        let mut w = Self::new(horizon, alpha, lambda)?;
        w.sigma = vec![1.0; episodes * horizon];
        Ok(w)
    }

    /// Appends the weights of one episode.
    pub fn push_episode(&mut self, sigmas: &[f64]) -> Result<()> {
        if sigmas.len() != self.horizon {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for horizon {}",
                sigmas.len(),
                self.horizon
            )));
        }
        check_weights(sigmas)?;
        self.sigma.extend_from_slice(sigmas);
        Ok(())
    }

    /// Overwrites the weights of stage `h` for all episodes.
    pub fn set_stage(&mut self, h: usize, sigmas: &[f64]) -> Result<()> {
        if sigmas.len() != self.episodes() || h >= self.horizon {
            return Err(Error::DimensionMismatch("stage column shape".into()));
        }
        check_weights(sigmas)?;
        for (t, &s) in sigmas.iter().enumerate() {
            self.sigma[t * self.horizon + h] = s;
        }
        Ok(())
    }

    #[inline]
    pub fn sigma(&self, t: usize, h: usize) -> f64 {
        self.sigma[t * self.horizon + h]
    }

    pub fn episode(&self, t: usize) -> &[f64] {
        &self.sigma[t * self.horizon..(t + 1) * self.horizon]
    }

    pub fn stage(&self, h: usize) -> Vec<f64> {
        (0..self.episodes()).map(|t| self.sigma(t, h)).collect()
    }

    pub fn episodes(&self) -> usize {
        self.sigma.len().checked_div(self.horizon).unwrap_or(0)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Largest weight, `1` for an empty table.
    pub fn max_sigma(&self) -> f64 {
        self.sigma.iter().cloned().fold(1.0, f64::max)
    }
}

fn check_weights(sigmas: &[f64]) -> Result<()> {
    match sigmas.iter().find(|s| !(**s >= 1.0) || !s.is_finite()) {
        Some(s) => Err(Error::InvalidParameter(format!("weight {s} is not a finite value ≥ 1"))),
        None => Ok(()),
    }
}

/// A visited pair `z = (x, a)` and the weight it received.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub x: usize,
    pub a: usize,
    pub sigma: f64,
}

/// Visited pairs per stage, in episode order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryBuffer {
    stages: Vec<Vec<HistoryEntry>>,
}

impl HistoryBuffer {
    pub fn new(horizon: usize) -> Self {
        HistoryBuffer {
            stages: vec![Vec::new(); horizon],
        }
    }

    /// Records one episode: `pairs[h]` with weight `sigmas[h]`.
    pub fn push_episode(&mut self, pairs: &[(usize, usize)], sigmas: &[f64]) -> Result<()> {
        if pairs.len() != self.stages.len() || sigmas.len() != self.stages.len() {
            return Err(Error::DimensionMismatch("history episode length".into()));
        }
        for (h, (&(x, a), &sigma)) in pairs.iter().zip(sigmas).enumerate() {
            self.stages[h].push(HistoryEntry { x, a, sigma });
        }
        Ok(())
    }

    pub fn stage(&self, h: usize) -> &[HistoryEntry] {
        &self.stages[h]
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// Number of recorded episodes.
    pub fn len(&self) -> usize {
        self.stages.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Truncated weighted information ratio
/// `min{1, sup_{M ∈ set} l(z) / √(λ + Σ_s l(z_s)²/σ_s)}` with
/// `l = TV(P_M^h ‖ P_ref^h)`.
pub fn information_ratio(
    tv: &PairwiseTv,
    model_set: &[usize],
    reference: usize,
    history: &HistoryBuffer,
    z: (usize, usize),
    h: usize,
    lambda: f64,
) -> Result<f64> {
    if model_set.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    let mut best: f64 = 0.0;
    for &m in model_set {
        let num = tv.get(m, reference, h, z.0, z.1);
        if num == 0.0 {
            continue;
        }
        let in_sample: f64 = history
            .stage(h)
            .iter()
            .map(|e| tv.get(m, reference, h, e.x, e.a).powi(2) / e.sigma)
            .sum();
        best = best.max(num / (lambda + in_sample).sqrt());
    }
    Ok(best.min(1.0))
}

/// `σ = max{1, U/α}`.
pub fn online_weight(u: f64, alpha: f64) -> f64 {
    (u / alpha).max(1.0)
}

/// Output of [`weight_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightIteration {
    pub sigma: Vec<f64>,
    /// `trace[k]` holds `σ^k`; `trace[0]` is all ones.
    pub trace: Vec<Vec<f64>>,
}

impl WeightIteration {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Default iteration cap `⌈10·log₂(T/λ)⌉ + 20`.
pub fn default_iteration_cap(samples: usize, lambda: f64) -> usize {
    let ratio = (samples as f64 / lambda).max(1.0);
    (10.0 * ratio.log2()).ceil() as usize + 20
}

/// Fixed-point uncertainty weights for one stage of an offline dataset.
///
/// Iterates `σ_t^k = max(1, sup_{M,M'} (l_t/α) / √(λ + Σ_s l_s²/σ_s^{k−1}))`
/// from `σ^0 = 1` until `max_t σ_t^k/σ_t^{k−1} ≤ 2`.
pub fn weight_iteration(
    tv: &PairwiseTv,
    pairs: &[(usize, usize)],
    h: usize,
    model_set: &[usize],
    alpha: f64,
    lambda: f64,
    cap: Option<usize>,
) -> Result<WeightIteration> {
    if model_set.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    if !(alpha > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParameter("alpha and lambda must be positive".into()));
    }
    let cap = cap.unwrap_or_else(|| default_iteration_cap(pairs.len(), lambda));
    let model_pairs = unordered_pairs(model_set);
    let mut trace = vec![vec![1.0; pairs.len()]];
    let mut l = vec![0.0; pairs.len()];
    loop {
        let prev = trace.last().expect("trace starts non-empty");
        let mut next: Vec<f64> = vec![1.0; pairs.len()];
        if alpha.is_finite() {
            for &(i, j) in &model_pairs {
                let mut denom = lambda;
                for (s, &(x, a)) in pairs.iter().enumerate() {
                    l[s] = tv.get(i, j, h, x, a);
                    denom += l[s] * l[s] / prev[s];
                }
                let scale = 1.0 / (alpha * denom.sqrt());
                for (n, &ls) in next.iter_mut().zip(&l) {
                    *n = (*n).max(ls * scale);
                }
            }
        }
        let growth = next
            .iter()
            .zip(prev)
            .map(|(n, p)| n / p)
            .fold(0.0, f64::max);
        trace.push(next);
        if growth <= 2.0 {
            break;
        }
        if trace.len() > cap {
            return Err(Error::NonConvergence(cap));
        }
    }
    let sigma = trace.last().cloned().unwrap_or_default();
    Ok(WeightIteration { sigma, trace })
}

/// `ψ(z_t) = sup_{M,M'} (l_t/α) / √(λ + Σ_s l_s²/σ_s)` at the given weights.
pub fn uncertainty_at_weights(
    tv: &PairwiseTv,
    pairs: &[(usize, usize)],
    h: usize,
    model_set: &[usize],
    sigma: &[f64],
    alpha: f64,
    lambda: f64,
) -> Vec<f64> {
    let mut psi: Vec<f64> = vec![0.0; pairs.len()];
    for (i, j) in unordered_pairs(model_set) {
        let denom: f64 = lambda
            + pairs
                .iter()
                .zip(sigma)
                .map(|(&(x, a), s)| tv.get(i, j, h, x, a).powi(2) / s)
                .sum::<f64>();
        let scale = 1.0 / (alpha * denom.sqrt());
        for (p, &(x, a)) in psi.iter_mut().zip(pairs) {
            *p = (*p).max(tv.get(i, j, h, x, a) * scale);
        }
    }
    psi
}

pub(crate) fn unordered_pairs(set: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (k, &i) in set.iter().enumerate() {
        for &j in &set[k + 1..] {
            if i != j {
                out.push((i, j));
            }
        }
    }
    out
}
