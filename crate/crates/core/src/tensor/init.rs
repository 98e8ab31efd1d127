//! Seeded fan-in scaled uniform initializers.

use rand::Rng;

use super::Tensor;

/// `U(−a, a)` with `a = √(6 / fan_in)`, for layers followed by ReLU.
pub fn he_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    uniform(shape, (6.0 / fan_in.max(1) as f64).sqrt(), rng)
}

/// `U(−a, a)` with `a = √(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor {
    uniform(shape, (6.0 / (fan_in + fan_out).max(1) as f64).sqrt(), rng)
}

pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    let data = if bound > 0.0 {
        (0..n).map(|_| rng.random_range(-bound..bound)).collect()
    } else {
        vec![0.0; n]
    };
    Tensor::from_vec(shape, data).expect("length matches shape")
}
