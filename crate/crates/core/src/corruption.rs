//! Transition-corruption adversaries and per-stage corruption accounting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::sup_ratio_deviation;
use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedTree};

/// Corruption strategy and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    Null,
    /// At `(trigger_state, optimal_actions[h])` replace the row by `replacement`.
    Swap {
        trigger_state: usize,
        optimal_actions: Vec<usize>,
        replacement: Vec<f64>,
    },
    /// Multiply every on-support entry by `1 + magnitude·u`, `u ~ U[−1, 1]`,
    /// then renormalize.
    BudgetedRandom { magnitude: f64, seed: u64 },
}

/// A stateful adversary bound to one simulation run.
///
/// The per-stage budget is a hard gate: a corruption of size `c` at stage `h`
/// is applied only if `spent[h] + c ≤ budget`; otherwise the true row is
/// returned.
#[derive(Debug, Clone, PartialEq)]
pub struct Adversary {
    strategy: Strategy,
    budget: f64,
    spent: Vec<f64>,
}

impl Adversary {
    pub fn new(strategy: Strategy, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) {
            return Err(Error::InvalidParameter(format!("budget must be nonnegative, got {budget}")));
        }
        if let Strategy::BudgetedRandom { magnitude, .. } = strategy {
            if !(0.0..1.0).contains(&magnitude) {
                return Err(Error::InvalidParameter(format!("magnitude must lie in [0, 1), got {magnitude}")));
            }
        }
        if let Strategy::Swap { replacement, .. } = &strategy {
            crate::divergence::validate_row(replacement, "replacement row")?;
        }
        Ok(Adversary {
            strategy,
            budget,
            spent: Vec::new(),
        })
    }

    /// The adversary that never corrupts.
    pub fn null() -> Self {
        Adversary {
            strategy: Strategy::Null,
            budget: 0.0,
            spent: Vec::new(),
        }
    }

    /// Swap-to-flat attack on the online hard instance: at `(x_1, a*_h)` the
    /// row `(3/4, 1/4)` over `{x_2, x_3}` becomes `(1/4, 3/4)`, costing `c = 2`.
    pub fn online_lower_bound(optimal_actions: Vec<usize>, budget: f64) -> Result<Self> {
        Self::new(
            Strategy::Swap {
                trigger_state: 1,
                optimal_actions,
                replacement: vec![0.0, 0.0, 0.25, 0.75],
            },
            budget,
        )
    }

    /// Attack on the offline hard instance: at `(x_1, a*_h)` the row
    /// `(1/2+η, 1/2−η)` becomes `(1/2−η, 1/2+η)`, costing `c = 4η/(1−2η)`.
    pub fn offline_lower_bound(optimal_actions: Vec<usize>, eta: f64, budget: f64) -> Result<Self> {
        Self::new(
            Strategy::Swap {
                trigger_state: 1,
                optimal_actions,
                replacement: vec![0.0, 0.0, 0.5 - eta, 0.5 + eta],
            },
            budget,
        )
    }

    pub fn budgeted_random(budget: f64, magnitude: f64, seed: u64) -> Result<Self> {
        Self::new(Strategy::BudgetedRandom { magnitude, seed }, budget)
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Budget spent so far at each stage.
    pub fn spent(&self) -> &[f64] {
        &self.spent
    }

    /// Observes `(t, h, x, a)` and the true row; returns the row to sample
    /// from and its corruption magnitude `sup |q/p − 1|` over the true support.
    pub fn corrupt(&mut self, t: usize, h: usize, x: usize, a: usize, true_row: &[f64]) -> Result<(Vec<f64>, f64)> {
        let proposal = match &self.strategy {
            Strategy::Null => None,
            Strategy::Swap {
                trigger_state,
                optimal_actions,
                replacement,
            } => {
                let hit = x == *trigger_state && optimal_actions.get(h) == Some(&a);
                if hit && replacement.len() != true_row.len() {
                    return Err(Error::DimensionMismatch("replacement row length".into()));
                }
                hit.then(|| replacement.clone())
            }
            Strategy::BudgetedRandom { magnitude, seed } => {
                (*magnitude > 0.0).then(|| random_perturbation(true_row, *magnitude, *seed, t, h))
            }
        };
        let Some(row) = proposal else {
            return Ok((true_row.to_vec(), 0.0));
        };
        let c = sup_ratio_deviation(true_row, &row);
        if self.spent.len() <= h {
            self.spent.resize(h + 1, 0.0);
        }
        if c > 0.0 && self.spent[h] + c <= self.budget {
            self.spent[h] += c;
            Ok((row, c))
        } else {
            Ok((true_row.to_vec(), 0.0))
        }
    }
}

fn random_perturbation(true_row: &[f64], magnitude: f64, seed: u64, t: usize, h: usize) -> Vec<f64> {
    let mut rng = SeedTree::new(seed)
        .child(Purpose::Adversary, t as u64)
        .stage(h)
        .rng();
    let mut row: Vec<f64> = true_row
        .iter()
        .map(|&p| {
            let u: f64 = rng.random_range(-1.0..=1.0);
            if p > 0.0 {
                p * (1.0 + magnitude * u)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = row.iter().sum();
    for q in &mut row {
        *q /= total;
    }
    row
}

/// One recorded step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub t: usize,
    pub h: usize,
    pub x: usize,
    pub a: usize,
    pub c: f64,
    /// True and emitted rows, when the ledger keeps rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<(Vec<f64>, Vec<f64>)>,
}

/// Per-`(t, h)` corruption magnitudes and their per-stage totals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorruptionLedger {
    entries: Vec<LedgerEntry>,
    per_stage_totals: Vec<f64>,
    keep_rows: bool,
}

/// Realized corruption: per-stage totals and their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub per_stage: Vec<f64>,
    pub max_stage: f64,
}

impl CorruptionLedger {
    pub fn new(horizon: usize) -> Self {
        CorruptionLedger {
            entries: Vec::new(),
            per_stage_totals: vec![0.0; horizon],
            keep_rows: false,
        }
    }

    /// A ledger that also stores the true and emitted rows of every step.
    pub fn with_rows(horizon: usize) -> Self {
        CorruptionLedger {
            keep_rows: true,
            ..Self::new(horizon)
        }
    }

    pub fn keeps_rows(&self) -> bool {
        self.keep_rows
    }

    pub fn record(&mut self, t: usize, h: usize, x: usize, a: usize, c: f64, true_row: &[f64], emitted: &[f64]) {
        if self.per_stage_totals.len() <= h {
            self.per_stage_totals.resize(h + 1, 0.0);
        }
        self.per_stage_totals[h] += c;
        self.entries.push(LedgerEntry {
            t,
            h,
            x,
            a,
            c,
            rows: self.keep_rows.then(|| (true_row.to_vec(), emitted.to_vec())),
        });
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn per_stage_totals(&self) -> &[f64] {
        &self.per_stage_totals
    }

    pub fn max_stage_total(&self) -> f64 {
        self.per_stage_totals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary {
            per_stage: self.per_stage_totals.clone(),
            max_stage: self.max_stage_total(),
        }
    }
}
