//! Diagonal-plus-rank-one linear solves.
//!
//! Both the augmented-Lagrangian stationarity system and the PI closed loop
//! reduce to `(diag(d) + w·𝟙𝟙ᵀ)·x = r` with `d_i > 0`, `w ≥ 0`, which is SPD.
//! Eliminating the aggregate `u = Σ x_i` gives an O(N) solve.

/// Solves `(diag(diag) + weight·𝟙𝟙ᵀ)·x = rhs`.
///
/// Requires `diag[i] > 0` and `1 + weight·Σ 1/diag[i] ≠ 0` (always true for `weight ≥ 0`).
pub fn solve_diag_plus_ones(diag: &[f64], weight: f64, rhs: &[f64]) -> Vec<f64> {
    debug_assert_eq!(diag.len(), rhs.len());
    let inv_sum: f64 = diag.iter().map(|d| 1.0 / d).sum();
    let scaled_sum: f64 = rhs.iter().zip(diag).map(|(r, d)| r / d).sum();
    let aggregate = scaled_sum / (1.0 + weight * inv_sum);
    rhs.iter()
        .zip(diag)
        .map(|(r, d)| (r - weight * aggregate) / d)
        .collect()
}

/// `max_i |(diag_i·x_i + weight·Σx) − rhs_i|`.
pub fn residual_diag_plus_ones(diag: &[f64], weight: f64, rhs: &[f64], x: &[f64]) -> f64 {
    let sum: f64 = x.iter().sum();
    diag.iter()
        .zip(x)
        .zip(rhs)
        .map(|((d, xi), r)| (d * xi + weight * sum - r).abs())
        .fold(0.0, f64::max)
}
