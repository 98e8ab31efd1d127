//! Central finite-difference gradient checking.
//!
//! Layer outputs are reduced to a scalar through a fixed random projection
//! `Σ r·y`, whose gradient with respect to `y` is `r` itself. That `r` is fed
//! to the layer's backward function and the result compared against
//! numerically differentiated projections.

use rand::Rng;

use super::Tensor;

/// Probe step for central differences.
pub const EPSILON: f64 = 1e-4;

/// Floor on the denominator of the relative error.
const FLOOR: f64 = 1e-6;

pub fn random_tensor<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

/// `Σ r·y`.
pub fn projection_loss(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Central-difference gradient of `f` at `point`.
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(point: &[f64], mut f: F) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + EPSILON;
            let up = f(&x);
            x[i] = orig - EPSILON;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * EPSILON)
        })
        .collect()
}

/// Largest `|a − n| / max(|a|, |n|, 1e-6)` over all coordinates.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(FLOOR))
        .fold(0.0, f64::max)
}

/// Compares `analytic` against the numeric gradient of `f` at `point`.
pub fn relative_error<F: FnMut(&[f64]) -> f64>(point: &[f64], analytic: &[f64], f: F) -> f64 {
    max_relative_error(analytic, &numeric_gradient(point, f))
}
