//! Default hyper-parameters `(α, λ, β)` shared by the online and offline learners.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to `λ = log|M|` so that a singleton class stays well-defined.
pub const LAMBDA_FLOOR: f64 = 1e-6;

/// What the learner knows about the corruption level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "level", rename_all = "snake_case")]
pub enum CorruptionKnowledge {
    /// The true level `C`.
    Known(f64),
    /// A tolerance threshold `C̄` used in place of the unknown level.
    Tolerance(f64),
}

impl CorruptionKnowledge {
    pub fn level(&self) -> f64 {
        match *self {
            CorruptionKnowledge::Known(c) | CorruptionKnowledge::Tolerance(c) => c,
        }
    }

    pub fn is_known(&self) -> bool {
        matches!(self, CorruptionKnowledge::Known(_))
    }
}

/// Learner hyper-parameters. `alpha = +∞` means all weights are one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub lambda: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Params {
    pub fn beta_sq(&self) -> f64 {
        self.beta * self.beta
    }

    pub fn unweighted(&self) -> bool {
        self.alpha.is_infinite()
    }
}

/// `λ = log|M|`, `α = √(log|M|·log²B)/C`, `β = 5√(log(|M|/δ)·log²B) + 7αC`
/// for a known level, and `α = √log|M|/C̄`, `β = 5√(log(|M|/δ)·log²B)` for a
/// tolerance threshold.
///
/// A zero level, or a degenerate class where the `α` numerator vanishes,
/// gives `α = +∞` and drops the `7αC` term.
pub fn default_parameters(
    class_size: usize,
    delta: f64,
    ratio_bound: f64,
    corruption: CorruptionKnowledge,
) -> Result<Params> {
    if class_size == 0 {
        return Err(Error::EmptyModelSet);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(ratio_bound >= 1.0) {
        return Err(Error::InvalidParameter(format!("ratio bound must be at least 1, got {ratio_bound}")));
    }
    let level = corruption.level();
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::InvalidParameter(format!("corruption level must be finite and nonnegative, got {level}")));
    }
    let log_m = (class_size as f64).ln();
    let log_b = ratio_bound.ln();
    let lambda = log_m.max(LAMBDA_FLOOR);
    let numerator = match corruption {
        CorruptionKnowledge::Known(_) => (log_m * log_b * log_b).sqrt(),
        CorruptionKnowledge::Tolerance(_) => log_m.sqrt(),
    };
    let alpha = if level == 0.0 || numerator == 0.0 {
        f64::INFINITY
    } else {
        numerator / level
    };
    let mut beta = 5.0 * ((class_size as f64 / delta).ln() * log_b * log_b).sqrt();
    if corruption.is_known() && alpha.is_finite() {
        beta += 7.0 * alpha * level;
    }
    Ok(Params {
        alpha,
        lambda,
        beta,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_level_formula() {
        let c = (100f64).ln().sqrt();
        let p = default_parameters(100, 0.05, std::f64::consts::E, CorruptionKnowledge::Known(c)).unwrap();
        assert!((p.alpha - 1.0).abs() < 1e-12);
        assert!((p.lambda - 100f64.ln()).abs() < 1e-15);
        assert!((p.beta - 28.81).abs() < 5e-3);
    }

    #[test]
    fn zero_level_is_unweighted() {
        let p = default_parameters(8, 0.05, 3.0, CorruptionKnowledge::Known(0.0)).unwrap();
        assert!(p.unweighted());
        let expected = 5.0 * ((8.0f64 / 0.05).ln() * 3f64.ln().powi(2)).sqrt();
        assert!((p.beta - expected).abs() < 1e-12);
    }

    #[test]
    fn singleton_floors_lambda() {
        let p = default_parameters(1, 0.05, 1.0, CorruptionKnowledge::Known(5.0)).unwrap();
        assert_eq!(p.lambda, LAMBDA_FLOOR);
        assert!(p.unweighted());
    }

    #[test]
    fn tolerance_variant() {
        let p = default_parameters(16, 0.1, 3.0, CorruptionKnowledge::Tolerance(4.0)).unwrap();
        assert!((p.alpha - 16f64.ln().sqrt() / 4.0).abs() < 1e-15);
        let expected = 5.0 * ((160.0f64).ln() * 3f64.ln().powi(2)).sqrt();
        assert!((p.beta - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(default_parameters(4, 0.0, 2.0, CorruptionKnowledge::Known(1.0)).is_err());
        assert!(default_parameters(4, 1.0, 2.0, CorruptionKnowledge::Known(1.0)).is_err());
    }
}
