//! Weight initializers.

use ndarray::{Array1, Array2};
use rand::Rng as _;

use super::Real;
use crate::rng::Rng;

/// Uniform in `(-limit, limit)`.
pub fn uniform<F: Real>(rows: usize, cols: usize, limit: f64, rng: &mut Rng) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || F::of(rng.random_range(-limit..limit)))
}

/// Glorot/Xavier uniform: limit `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<F: Real>(
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut Rng,
) -> Array2<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rows, cols, limit, rng)
}

pub fn zeros<F: Real>(n: usize) -> Array1<F> {
    Array1::zeros(n)
}
