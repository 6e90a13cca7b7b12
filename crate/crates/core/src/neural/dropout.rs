use ndarray::Array2;
use rand::Rng as _;

use super::Real;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` so the
/// expected activation is unchanged. Returns the output and, when units
/// were dropped, the mask to hand to [`dropout_backward`].
pub fn dropout_forward<F: Real>(
    x: &Array2<F>,
    rate: f64,
    training: bool,
    rng: &mut Rng,
) -> Result<(Array2<F>, Option<Array2<F>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Argument(format!(
            "dropout rate {rate} not in [0, 1)"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = F::of(1.0 / (1.0 - rate));
    let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
        if rng.random::<f64>() < rate {
            F::zero()
        } else {
            keep
        }
    });
    Ok((x * &mask, Some(mask)))
}

pub fn dropout_backward<F: Real>(grad: &Array2<F>, mask: Option<&Array2<F>>) -> Array2<F> {
    match mask {
        Some(m) => grad * m,
        None => grad.clone(),
    }
}
