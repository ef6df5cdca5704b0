//! Trajectory simulation under an adversary.

use rand::Rng;

use crate::corruption::{Adversary, CorruptionLedger};
use crate::divergence::{sup_ratio_deviation, validate_row};
use crate::error::{Error, Result};
use crate::mdp::{sample_index, ActionRule, EpisodicMdp, Step, Trajectory};
use crate::rng::{Purpose, SeedTree};

/// Rolls out one episode of `policy` in `true_model`, letting `adversary`
/// replace each transition row after observing `(x, a)`.
///
/// Randomness for episode `t` comes from `seeds.episode(t)`, split per stage,
/// so the outcome depends only on `(seeds, t)` and the adversary state.
/// Returns the trajectory and `c_t^h` for every stage.
pub fn simulate_episode<P: ActionRule + ?Sized>(
    true_model: &EpisodicMdp,
    policy: &P,
    adversary: &mut Adversary,
    seeds: &SeedTree,
    t: usize,
) -> Result<(Trajectory, Vec<f64>)> {
    simulate_episode_logged(true_model, policy, adversary, seeds, t, None)
}

/// [`simulate_episode`] that also records every step in `ledger`.
pub fn simulate_episode_logged<P: ActionRule + ?Sized>(
    true_model: &EpisodicMdp,
    policy: &P,
    adversary: &mut Adversary,
    seeds: &SeedTree,
    t: usize,
    mut ledger: Option<&mut CorruptionLedger>,
) -> Result<(Trajectory, Vec<f64>)> {
    let episode = seeds.episode(t);
    let mut x = episode_initial_state(true_model, seeds, t);
    let horizon = true_model.horizon();
    let mut steps = Vec::with_capacity(horizon);
    let mut cs = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let mut rng = episode.stage(h).rng();
        let (u_action, u_next): (f64, f64) = (rng.random(), rng.random());
        let a = policy.choose(h, x, u_action);
        if a >= true_model.num_actions() {
            return Err(Error::DimensionMismatch(format!("policy chose action {a}")));
        }
        let true_row = true_model.row(h, x, a);
        let (row, c) = adversary.corrupt(t, h, x, a, true_row)?;
        check_corrupted_row(true_row, &row, h, x, a)?;
        let recomputed = sup_ratio_deviation(true_row, &row);
        debug_assert_eq!(recomputed, c);
        let next = sample_index(&row, u_next);
        if let Some(l) = ledger.as_deref_mut() {
            l.record(t, h, x, a, recomputed, true_row, &row);
        }
        steps.push(Step {
            state: x,
            action: a,
            reward: true_model.reward(h, x, a),
            next_state: next,
        });
        cs.push(recomputed);
        x = next;
    }
    Ok((Trajectory { episode: t, steps }, cs))
}

/// The start state of episode `t`, observable before the episode is played.
pub fn episode_initial_state(model: &EpisodicMdp, seeds: &SeedTree, t: usize) -> usize {
    match model.initial_distribution() {
        Some(d) => {
            let u: f64 = seeds.episode(t).child(Purpose::Initial, 0).rng().random();
            sample_index(d, u)
        }
        None => model.initial_state(),
    }
}

fn check_corrupted_row(true_row: &[f64], row: &[f64], h: usize, x: usize, a: usize) -> Result<()> {
    if row.len() != true_row.len() {
        return Err(Error::DimensionMismatch("corrupted row length".into()));
    }
    validate_row(row, "corrupted row")?;
    if true_row.iter().zip(row).any(|(p, q)| (*p > 0.0) != (*q > 0.0)) {
        return Err(Error::AdversarySupportViolation { h, x, a });
    }
    Ok(())
}
