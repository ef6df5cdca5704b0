//! Reference implementations used as oracles by the integration tests.
//! Everything here is written from the definitions, without the library's
//! caches or grouped sums.

#![allow(dead_code)]

use crmb_core::corruption::CorruptionLedger;
use crmb_core::EpisodicMdp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn ratio_deviation(p: &[f64], q: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *a > 0.0 {
            best = best.max((b / a - 1.0).abs());
        }
    }
    best
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// A probability row with every entry at least `floor`.
pub fn random_row(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| (1.0 - n as f64 * floor) * v / total + floor).collect()
}

pub fn random_rewards(rng: &mut ChaCha8Rng, s: usize, a: usize, h: usize) -> Vec<Vec<Vec<f64>>> {
    (0..h)
        .map(|_| (0..s).map(|_| (0..a).map(|_| rng.random::<f64>() / h as f64).collect()).collect())
        .collect()
}

pub fn random_model(rng: &mut ChaCha8Rng, s: usize, a: usize, rewards: &[Vec<Vec<f64>>], floor: f64) -> EpisodicMdp {
    let h = rewards.len();
    let p = (0..h)
        .map(|_| (0..s).map(|_| (0..a).map(|_| random_row(rng, s, floor)).collect()).collect())
        .collect();
    EpisodicMdp::new(p, rewards.to_vec(), 0).unwrap()
}

/// `(Q, V)` of `model`; `policy = None` evaluates the greedy policy.
/// `q[h][x][a]`, `v[h][x]` with `v[H] = 0`.
pub fn dp(model: &EpisodicMdp, policy: Option<&[Vec<usize>]>) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    let (s, na, hz) = (model.num_states(), model.num_actions(), model.horizon());
    let mut q = vec![vec![vec![0.0; na]; s]; hz];
    let mut v = vec![vec![0.0; s]; hz + 1];
    for h in (0..hz).rev() {
        for x in 0..s {
            for a in 0..na {
                let mut e = 0.0;
                for y in 0..s {
                    e += model.row(h, x, a)[y] * v[h + 1][y];
                }
                q[h][x][a] = model.reward(h, x, a) + e;
            }
            v[h][x] = match policy {
                Some(p) => q[h][x][p[h][x]],
                None => q[h][x].iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            };
        }
    }
    (q, v)
}

/// Greedy actions with ties to the lowest index.
pub fn greedy(q: &[Vec<Vec<f64>>]) -> Vec<Vec<usize>> {
    q.iter()
        .map(|stage| {
            stage
                .iter()
                .map(|row| {
                    let mut best = 0;
                    for a in 1..row.len() {
                        if row[a] > row[best] {
                            best = a;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

pub fn start_value(model: &EpisodicMdp, v0: &[f64]) -> f64 {
    model.start_distribution().iter().zip(v0).map(|(p, v)| p * v).sum()
}

/// State distribution per stage of a deterministic policy.
pub fn state_distributions(model: &EpisodicMdp, policy: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let s = model.num_states();
    let mut d = model.start_distribution();
    let mut out = Vec::new();
    for (h, pi) in policy.iter().enumerate() {
        out.push(d.clone());
        let mut next = vec![0.0; s];
        for x in 0..s {
            for y in 0..s {
                next[y] += d[x] * model.row(h, x, pi[x])[y];
            }
        }
        d = next;
    }
    out
}

/// Counters for the corruption audit.
#[derive(Debug, Default, Clone, Copy)]
pub struct AuditCounts {
    pub runs: usize,
    pub entries: usize,
    pub violations: usize,
}

/// Recomputes every ledger entry's `c` from its stored rows and checks the
/// per-stage totals against `budget`.
pub fn audit_ledger(ledger: &CorruptionLedger, budget: f64) -> AuditCounts {
    let horizon = ledger.per_stage_totals().len();
    let mut totals = vec![0.0; horizon];
    let mut violations = 0;
    for e in ledger.entries() {
        match &e.rows {
            Some((truth, emitted)) => {
                let c = ratio_deviation(truth, emitted);
                let identical = truth == emitted;
                if c != e.c || (identical != (c == 0.0)) {
                    violations += 1;
                }
                totals[e.h] += c;
            }
            None => violations += 1,
        }
    }
    for (mine, theirs) in totals.iter().zip(ledger.per_stage_totals()) {
        if (mine - theirs).abs() > 1e-9 * (1.0 + mine.abs()) || *mine > budget * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    AuditCounts {
        runs: 1,
        entries: ledger.entries().len(),
        violations,
    }
}
