//! TV-eluder dimension estimators.
//!
//! A point `z` is ε-independent of a set `Z` when some model pair has
//! in-sample error `Σ_{z'∈Z} l(z')² ≤ ε²` but out-of-sample error `l(z) > ε`.
//! For one pair this holds exactly for `ε ∈ [√Σ l(z')², l(z))`, so the set of
//! scales at which `z` is independent is a finite union of half-open
//! intervals. Both estimators work with these interval sets, which makes the
//! supremum over `ε' ≥ ε` in the definition exact.

use crate::error::{Error, Result};
use crate::model_class::ModelClass;

use super::unordered_pairs;

/// Largest candidate count accepted by [`eluder_dimension_exact`].
pub const EXACT_LIMIT: usize = 12;

/// `l_p(z_k)` for every unordered model pair `p` and candidate `k`.
struct Distances {
    per_pair: Vec<Vec<f64>>,
}

impl Distances {
    fn new(class: &ModelClass, candidates: &[(usize, usize)], h: usize) -> Self {
        let tv = class.pairwise_tv();
        let all: Vec<usize> = (0..class.len()).collect();
        let per_pair = unordered_pairs(&all)
            .into_iter()
            .map(|(i, j)| candidates.iter().map(|&(x, a)| tv.get(i, j, h, x, a)).collect())
            .collect();
        Distances { per_pair }
    }

    /// Scales at which candidate `k` is independent of a set with per-pair
    /// squared in-sample sums `sums`, as sorted disjoint `[lo, hi)` intervals.
    fn independence_set(&self, sums: &[f64], k: usize) -> Vec<(f64, f64)> {
        let mut raw: Vec<(f64, f64)> = self
            .per_pair
            .iter()
            .zip(sums)
            .filter_map(|(l, &s)| {
                let lo = s.sqrt();
                (lo < l[k]).then_some((lo, l[k]))
            })
            .collect();
        merge(&mut raw)
    }
}

fn merge(raw: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
    for &(lo, hi) in raw.iter() {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo < hi {
            out.push((lo, hi));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn contains(outer: &[(f64, f64)], inner: &[(f64, f64)]) -> bool {
    intersect(outer, inner) == inner
}

/// Membership of `e` in an interval set, with the maximal interval around
/// `e` on which membership does not change.
fn locate(set: &[(f64, f64)], e: f64) -> (bool, f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    for &(a, b) in set {
        if e < a {
            return (false, lo, a);
        }
        if e < b {
            return (true, a, b);
        }
        lo = b;
    }
    (false, lo, f64::INFINITY)
}

/// Greedy estimate: scan `candidates` in order, keeping each point that is
/// ε'-independent of the kept prefix, and report the best prefix length over
/// all `ε' ≥ epsilon`.
///
/// The result never exceeds [`eluder_dimension_exact`] and is nonincreasing
/// in `epsilon`.
pub fn eluder_dimension(class: &ModelClass, candidates: &[(usize, usize)], h: usize, epsilon: f64) -> usize {
    if class.len() < 2 || candidates.is_empty() {
        return 0;
    }
    let dist = Distances::new(class, candidates, h);
    let mut best = 0;
    let mut e = epsilon;
    // Every independence interval ends at a TV value, hence at most 1.
    while e < 1.0 {
        let (kept, next) = greedy_at(&dist, candidates.len(), e);
        best = best.max(kept);
        if !(next > e) {
            break;
        }
        e = next;
    }
    best
}

/// Greedy scan at a fixed scale. Returns the kept length and the end of the
/// scale interval on which the scan's decisions stay the same.
fn greedy_at(dist: &Distances, n: usize, e: f64) -> (usize, f64) {
    let mut sums = vec![0.0; dist.per_pair.len()];
    let mut kept = 0;
    let mut hi = f64::INFINITY;
    for k in 0..n {
        let set = dist.independence_set(&sums, k);
        let (member, _, end) = locate(&set, e);
        hi = hi.min(end);
        if member {
            kept += 1;
            for (s, l) in sums.iter_mut().zip(&dist.per_pair) {
                *s += l[k] * l[k];
            }
        }
    }
    (kept, hi)
}

/// Longest sequence drawn from `candidates` (any order, no repeats) whose
/// elements are all ε'-independent of their predecessors for one common
/// `ε' ≥ epsilon`.
///
/// Dynamic program over subsets; each reachable subset carries the
/// admissible scale sets of the orderings that reach it.
pub fn eluder_dimension_exact(
    class: &ModelClass,
    candidates: &[(usize, usize)],
    h: usize,
    epsilon: f64,
) -> Result<usize> {
    let n = candidates.len();
    if n > EXACT_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "exact eluder search supports at most {EXACT_LIMIT} candidates, got {n}"
        )));
    }
    if class.len() < 2 || n == 0 {
        return Ok(0);
    }
    let dist = Distances::new(class, candidates, h);
    let pairs = dist.per_pair.len();
    let full = 1usize << n;
    let mut sums = vec![0.0; full * pairs];
    for mask in 1..full {
        let k = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        for p in 0..pairs {
            let l = dist.per_pair[p][k];
            sums[mask * pairs + p] = sums[rest * pairs + p] + l * l;
        }
    }
    let mut states: Vec<Vec<Vec<(f64, f64)>>> = vec![Vec::new(); full];
    states[0].push(vec![(epsilon, f64::INFINITY)]);
    let mut best = 0;
    for mask in 0..full {
        if states[mask].is_empty() {
            continue;
        }
        best = best.max(mask.count_ones() as usize);
        let here = std::mem::take(&mut states[mask]);
        for k in (0..n).filter(|k| mask & (1 << k) == 0) {
            let ind = dist.independence_set(&sums[mask * pairs..(mask + 1) * pairs], k);
            let target = mask | (1 << k);
            for feasible in &here {
                let next = intersect(feasible, &ind);
                if next.is_empty() {
                    continue;
                }
                let bucket = &mut states[target];
                if bucket.iter().any(|f| contains(f, &next)) {
                    continue;
                }
                bucket.retain(|f| !contains(&next, f));
                bucket.push(next);
            }
        }
    }
    Ok(best)
}

/// `48·S·A·log(1 + 8SA/ε²)`, the tabular upper bound on the eluder dimension.
pub fn tabular_eluder_bound(num_states: usize, num_actions: usize, epsilon: f64) -> f64 {
    let sa = (num_states * num_actions) as f64;
    48.0 * sa * (1.0 + 8.0 * sa / (epsilon * epsilon)).ln()
}

/// `48·d·log(1 + 8d/ε²)`, the linear upper bound on the eluder dimension.
pub fn linear_eluder_bound(dim: usize, epsilon: f64) -> f64 {
    let d = dim as f64;
    48.0 * d * (1.0 + 8.0 * d / (epsilon * epsilon)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::EpisodicMdp;

    fn model(rows: [[f64; 2]; 4]) -> EpisodicMdp {
        let p = vec![vec![
            vec![rows[0].to_vec(), rows[1].to_vec()],
            vec![rows[2].to_vec(), rows[3].to_vec()],
        ]];
        EpisodicMdp::new(p, vec![vec![vec![0.0; 2]; 2]], 0).unwrap()
    }

    const ALL: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

    #[test]
    fn singleton_class_is_zero() {
        let c = ModelClass::singleton(model([[0.5, 0.5]; 4]));
        for e in [0.01, 0.1, 0.5] {
            assert_eq!(eluder_dimension(&c, &ALL, 0, e), 0);
            assert_eq!(eluder_dimension_exact(&c, &ALL, 0, e).unwrap(), 0);
        }
    }

    #[test]
    fn one_differing_pair() {
        let base = model([[0.5, 0.5]; 4]);
        let other = model([[0.5, 0.5], [0.9, 0.1], [0.5, 0.5], [0.5, 0.5]]);
        let c = ModelClass::new(vec![base, other], 0).unwrap();
        // Gap 0.4 at (0, 1).
        assert_eq!(eluder_dimension(&c, &ALL, 0, 0.3), 1);
        assert_eq!(eluder_dimension_exact(&c, &ALL, 0, 0.3).unwrap(), 1);
        assert_eq!(eluder_dimension(&c, &ALL, 0, 0.4), 0);
        assert_eq!(eluder_dimension_exact(&c, &ALL, 0, 0.45).unwrap(), 0);
    }

    #[test]
    fn repeated_gap_is_dependent() {
        // Same gap 0.3 at two points: after the first, the second would need
        // both ε' ≥ 0.3 and ε' < 0.3.
        let base = model([[0.5, 0.5]; 4]);
        let other = model([[0.8, 0.2], [0.8, 0.2], [0.5, 0.5], [0.5, 0.5]]);
        let c = ModelClass::new(vec![base, other], 0).unwrap();
        assert_eq!(eluder_dimension_exact(&c, &ALL, 0, 0.05).unwrap(), 1);
        assert_eq!(eluder_dimension(&c, &ALL, 0, 0.05), 1);
    }

    #[test]
    fn interval_helpers() {
        let mut raw = vec![(0.3, 0.5), (0.0, 0.2), (0.1, 0.25)];
        let m = merge(&mut raw);
        assert_eq!(m, vec![(0.0, 0.25), (0.3, 0.5)]);
        assert_eq!(locate(&m, 0.27), (false, 0.25, 0.3));
        assert_eq!(locate(&m, 0.3), (true, 0.3, 0.5));
        assert_eq!(intersect(&m, &[(0.2, 0.4)]), vec![(0.2, 0.25), (0.3, 0.4)]);
    }

    #[test]
    fn bounds_formulae() {
        assert!((tabular_eluder_bound(2, 2, 0.1) - 192.0 * (3201.0f64).ln()).abs() < 1e-9);
        assert!((linear_eluder_bound(3, 1.0) - 144.0 * 25.0f64.ln()).abs() < 1e-9);
    }
}
