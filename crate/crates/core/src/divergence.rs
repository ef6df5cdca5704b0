//! Distances between next-state distributions and likelihood utilities.

use crate::error::{Error, Result};
use crate::mdp::{EpisodicMdp, Transition};
use crate::uncertainty::WeightTable;

/// Absolute tolerance for a row to count as normalized.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// Checks that `row` is a probability vector.
pub fn validate_row(row: &[f64], context: &str) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !(0.0..=1.0 + ROW_TOLERANCE).contains(&p) || p.is_nan() {
            return Err(Error::InvalidProbability {
                value: p,
                context: context.to_string(),
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::NotARow {
            sum,
            context: context.to_string(),
        });
    }
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!("rows of length {} and {}", p.len(), q.len())));
    }
    validate_row(p, "first argument")?;
    validate_row(q, "second argument")
}

/// `½ Σ |p_i − q_i|` without validation.
#[inline]
pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Total-variation distance between two probability rows.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(tv(p, q).min(1.0))
}

/// Squared Hellinger distance `Σ (√p_i − √q_i)²` (no ½ factor).
pub fn hellinger_sq(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum())
}

/// `KL(p ‖ q)` in nats.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let mut acc = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportMismatch(format!("q is zero at index {i} where p is positive")));
            }
            acc += a * (a / b).ln();
        }
    }
    Ok(acc.max(0.0))
}

/// `sup_i |q_i / p_i − 1|` over the support of `p`.
///
/// This is the per-step corruption magnitude when `p` is the true row and
/// `q` the corrupted one.
pub fn sup_ratio_deviation(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| (b / a - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Exact `max(P*/P_M, P_M/P*)` over `h`, models and support entries.
pub fn ratio_bound(models: &[EpisodicMdp], true_index: usize) -> Result<f64> {
    let truth = models.get(true_index).ok_or(Error::EmptyModelSet)?;
    let mut bound: f64 = 1.0;
    for (mi, m) in models.iter().enumerate() {
        if !m.same_shape(truth) {
            return Err(Error::DimensionMismatch(format!("model {mi} shape")));
        }
        for h in 0..truth.horizon() {
            for x in 0..truth.num_states() {
                for a in 0..truth.num_actions() {
                    for (y, (&ps, &pm)) in truth.row(h, x, a).iter().zip(m.row(h, x, a)).enumerate() {
                        match (ps > 0.0, pm > 0.0) {
                            (true, true) => bound = bound.max(ps / pm).max(pm / ps),
                            (false, false) => {}
                            _ => {
                                return Err(Error::SupportMismatch(format!(
                                    "model {mi} at ({h},{x},{a}) next state {y}"
                                )))
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(bound)
}

/// Per-stage sums `Σ_t (1/σ_t^h) log P_M^h(x'|x,a)` over the observed transitions.
pub fn weighted_log_likelihood_by_stage(
    model: &EpisodicMdp,
    model_index: usize,
    data: &[Transition],
    weights: &WeightTable,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.horizon()];
    for tr in data {
        let p = model.row(tr.h, tr.x, tr.a)[tr.next];
        if p <= 0.0 {
            return Err(Error::ZeroLikelihood {
                model: model_index,
                h: tr.h,
            });
        }
        out[tr.h] += p.ln() / weights.sigma(tr.t, tr.h);
    }
    Ok(out)
}

/// `Σ_t Σ_h (1/σ_t^h) log P_M^h(x'|x,a)`.
pub fn weighted_log_likelihood(
    model: &EpisodicMdp,
    model_index: usize,
    data: &[Transition],
    weights: &WeightTable,
) -> Result<f64> {
    Ok(weighted_log_likelihood_by_stage(model, model_index, data, weights)?
        .iter()
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.001f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    #[test]
    fn tv_basics() {
        let p = [0.75, 0.25];
        let q = [0.25, 0.75];
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert!((tv_distance(&p, &q).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(tv_distance(&p, &[1.0]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(tv_distance(&p, &[0.5, 0.6]), Err(Error::NotARow { .. })));
    }

    #[test]
    fn hellinger_and_kl_values() {
        let p = [1.0, 0.0];
        let q = [0.5, 0.5];
        let h = hellinger_sq(&p, &q).unwrap();
        assert!((h - ((0.5f64.sqrt() - 1.0).powi(2) + 0.5)).abs() < 1e-15);
        assert!((h - 0.585_786_437_626_905).abs() < 1e-12);
        assert_eq!(hellinger_sq(&q, &q).unwrap(), 0.0);
        assert_eq!(kl(&q, &q).unwrap(), 0.0);
        assert!(matches!(kl(&q, &p), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn corruption_magnitudes() {
        // flat swap on the online hard instance: 3/4 -> 1/4
        let c = sup_ratio_deviation(&[0.0, 0.0, 0.75, 0.25], &[0.0, 0.0, 0.25, 0.75]);
        assert!((c - 2.0).abs() < 1e-15);
        // offline swap 1/2+η -> 1/2−η, η = 0.1
        let c = sup_ratio_deviation(&[0.6, 0.4], &[0.4, 0.6]);
        assert!((c - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ratio_bound_simple() {
        use crate::mdp::EpisodicMdp;
        let a = EpisodicMdp::new(vec![vec![vec![vec![0.75, 0.25]]; 2]], vec![vec![vec![0.0]; 2]], 0).unwrap();
        let b = EpisodicMdp::new(vec![vec![vec![vec![0.25, 0.75]]; 2]], vec![vec![vec![0.0]; 2]], 0).unwrap();
        assert_eq!(ratio_bound(std::slice::from_ref(&a), 0).unwrap(), 1.0);
        assert!((ratio_bound(&[a.clone(), b], 0).unwrap() - 3.0).abs() < 1e-15);
        let c = EpisodicMdp::new(vec![vec![vec![vec![1.0, 0.0]]; 2]], vec![vec![vec![0.0]; 2]], 0).unwrap();
        assert!(matches!(ratio_bound(&[a, c], 0), Err(Error::SupportMismatch(_))));
    }

    /// sup over subsets `A` of `|p(A) − q(A)|`.
    fn tv_by_subsets(p: &[f64], q: &[f64]) -> f64 {
        let n = p.len();
        (0u32..(1 << n))
            .map(|mask| {
                (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| p[i] - q[i])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn tv_matches_subset_enumeration(p in row(6), q in row(6)) {
            let d = tv_distance(&p, &q).unwrap();
            prop_assert!((d - tv_by_subsets(&p, &q)).abs() < 1e-12);
        }

        #[test]
        fn tv_is_a_metric(p in row(5), q in row(5), r in row(5)) {
            let pq = tv_distance(&p, &q).unwrap();
            prop_assert!((pq - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
            prop_assert!(pq <= tv_distance(&p, &r).unwrap() + tv_distance(&r, &q).unwrap() + 1e-12);
            prop_assert!((0.0..=1.0).contains(&pq));
        }

        #[test]
        fn tv_bounded_by_half_sup_ratio(p in row(5), q in row(5)) {
            let d = tv_distance(&p, &q).unwrap();
            prop_assert!(d <= 0.5 * sup_ratio_deviation(&q, &p) + 1e-12);
        }

        #[test]
        fn divergence_chain(p in row(4), q in row(4)) {
            let h2 = hellinger_sq(&p, &q).unwrap();
            let k = kl(&p, &q).unwrap();
            let rho = p.iter().zip(&q).map(|(a, b)| (a / b).ln()).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(h2 <= k + 1e-12);
            prop_assert!(k <= (3.0 + rho) * h2 + 1e-12);
            prop_assert!(h2 <= 2.0 * tv_distance(&p, &q).unwrap() + 1e-12);
        }
    }
}
