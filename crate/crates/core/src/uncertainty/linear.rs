//! Information-ratio bound for linearly embedded transition models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `min{1, √(φᵀ Σ⁻¹ φ)}` with `Σ = λI + Σ_s φ_s φ_sᵀ`.
pub fn linear_ir_bound(features: &[Vec<f64>], query: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("ridge must be positive, got {lambda}")));
    }
    let d = query.len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::DimensionMismatch("feature dimension".into()));
    }
    let mut sigma = DMatrix::<f64>::identity(d, d) * lambda;
    for f in features {
        let v = DVector::from_column_slice(f);
        sigma += &v * v.transpose();
    }
    let chol = sigma.cholesky().ok_or(Error::SingularMatrix)?;
    let q = DVector::from_column_slice(query);
    let quad = q.dot(&chol.solve(&q)).max(0.0);
    Ok(quad.sqrt().min(1.0))
}

/// One-hot embedding of `(x, a)` in dimension `S·A`, scaled by `scale`.
pub fn one_hot(num_states: usize, num_actions: usize, x: usize, a: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; num_states * num_actions];
    v[x * num_actions + a] = scale;
    v
}
