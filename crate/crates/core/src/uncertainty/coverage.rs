//! Offline data quality: the uniform coverage coefficient and the
//! information coefficient of the optimal policy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{occupancy, Policy};
use crate::model_class::{ModelClass, PairwiseTv};

use super::{unordered_pairs, WeightTable};

/// `min_h min_{M≠M'} [(1/T) Σ_t l_t²] / ρ^h(M,M')²`, where `ρ^h` is the largest
/// pairwise TV over all `(x, a)`. Pairs with `ρ = 0` are skipped.
///
/// `pairs[h]` lists the dataset's visited `(x, a)` at stage `h`.
pub fn coverage_coefficient(class: &ModelClass, pairs: &[Vec<(usize, usize)>]) -> Result<f64> {
    if pairs.len() != class.horizon() {
        return Err(Error::DimensionMismatch("one pair list per stage expected".into()));
    }
    if pairs.iter().any(Vec::is_empty) {
        return Err(Error::EmptyDataset);
    }
    let tv = class.pairwise_tv();
    let all: Vec<usize> = (0..class.len()).collect();
    let mut best: Option<f64> = None;
    for (h, stage) in pairs.iter().enumerate() {
        for (i, j) in unordered_pairs(&all) {
            let rho = tv.stage_slice(i, j, h).iter().cloned().fold(0.0, f64::max);
            if rho == 0.0 {
                continue;
            }
            let mean = stage.iter().map(|&(x, a)| tv.get(i, j, h, x, a).powi(2)).sum::<f64>() / stage.len() as f64;
            let ratio = mean / (rho * rho);
            best = Some(best.map_or(ratio, |b: f64| b.min(ratio)));
        }
    }
    best.ok_or(Error::AllPairsIdentical)
}

/// Information coefficient with its per-stage expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationCoefficient {
    pub value: f64,
    pub per_stage: Vec<f64>,
}

/// `max_h E_{π*}[ sup_{M,M'∈set} T·l(z)²/σ(z) / (λ + Σ_t l_t²/σ_t) ]`, with the
/// expectation taken exactly over the occupancy of `optimal_policy` in the
/// true model and `σ(z) = max{1, sup (l(z)/α)/√(λ + Σ_t l_t²/σ_t)}`.
pub fn information_coefficient(
    class: &ModelClass,
    confidence_set: &[usize],
    weights: &WeightTable,
    pairs: &[Vec<(usize, usize)>],
    optimal_policy: &Policy,
    lambda: f64,
    alpha: f64,
) -> Result<InformationCoefficient> {
    let horizon = class.horizon();
    if pairs.len() != horizon || weights.horizon() != horizon {
        return Err(Error::DimensionMismatch("one pair list per stage expected".into()));
    }
    let t_len = weights.episodes();
    if pairs.iter().any(|p| p.len() != t_len) {
        return Err(Error::DimensionMismatch("pair lists must match the weight table".into()));
    }
    let occ = occupancy(class.true_model(), optimal_policy)?;
    let tv = class.pairwise_tv();
    let model_pairs = unordered_pairs(confidence_set);
    let sa = class.num_states() * class.num_actions();
    let na = class.num_actions();
    let mut per_stage = vec![0.0; horizon];
    for h in 0..horizon {
        let sigma = weights.stage(h);
        let denoms: Vec<f64> = model_pairs
            .iter()
            .map(|&(i, j)| in_sample(&tv, i, j, h, &pairs[h], &sigma, lambda))
            .collect();
        let mut acc = 0.0;
        for cell in 0..sa {
            let d = occ[h][cell];
            if d == 0.0 {
                continue;
            }
            let (x, a) = (cell / na, cell % na);
            let mut sig: f64 = 1.0;
            for (&(i, j), den) in model_pairs.iter().zip(&denoms) {
                sig = sig.max(tv.get(i, j, h, x, a) / alpha / den.sqrt());
            }
            let mut sup: f64 = 0.0;
            for (&(i, j), den) in model_pairs.iter().zip(&denoms) {
                let l = tv.get(i, j, h, x, a);
                sup = sup.max(t_len as f64 * l * l / sig / den);
            }
            acc += d * sup;
        }
        per_stage[h] = acc;
    }
    let value = per_stage.iter().cloned().fold(0.0, f64::max);
    Ok(InformationCoefficient { value, per_stage })
}

fn in_sample(
    tv: &PairwiseTv,
    i: usize,
    j: usize,
    h: usize,
    pairs: &[(usize, usize)],
    sigma: &[f64],
    lambda: f64,
) -> f64 {
    lambda
        + pairs
            .iter()
            .zip(sigma)
            .map(|(&(x, a), s)| tv.get(i, j, h, x, a).powi(2) / s)
            .sum::<f64>()
}
