use nalgebra::DMatrix;

use super::Hyperparams;
use crate::error::{dim_mismatch, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn 5/2 ARD covariance `s (1 + √5 r + 5r²/3) exp(-√5 r)` with
/// `r² = Σ_h (x_h - x2_h)² / l_h²`.
pub fn matern52_ard(x: &[f64], x2: &[f64], theta: &Hyperparams) -> Result<f64> {
    let d = theta.dim();
    if x.len() != d {
        return Err(dim_mismatch(d, x.len()));
    }
    if x2.len() != d {
        return Err(dim_mismatch(d, x2.len()));
    }
    Ok(matern52_from_r(scaled_distance(x, x2, &theta.lengthscales), theta.signal_variance))
}

#[inline]
pub(crate) fn scaled_distance(x: &[f64], x2: &[f64], lengthscales: &[f64]) -> f64 {
    x.iter()
        .zip(x2)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let z = (a - b) / l;
            z * z
        })
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub(crate) fn matern52_from_r(r: f64, signal_variance: f64) -> f64 {
    let sr = SQRT5 * r;
    signal_variance * (1.0 + sr + sr * sr / 3.0) * (-sr).exp()
}

/// `∂k/∂ln l_h = (5/3) s (1 + √5 r) exp(-√5 r) (Δ_h / l_h)²`; this returns the
/// factor shared by all dimensions, `(5/3) s (1 + √5 r) exp(-√5 r)`.
#[inline]
pub(crate) fn matern52_lengthscale_factor(r: f64, signal_variance: f64) -> f64 {
    let sr = SQRT5 * r;
    signal_variance * (5.0 / 3.0) * (1.0 + sr) * (-sr).exp()
}

/// Noise-free kernel matrix `K_θ` over `points` (dimensions assumed checked).
pub fn covariance_matrix(points: &[Vec<f64>], theta: &Hyperparams) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = theta.signal_variance;
        for j in 0..i {
            let r = scaled_distance(&points[i], &points[j], &theta.lengthscales);
            let v = matern52_from_r(r, theta.signal_variance);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
