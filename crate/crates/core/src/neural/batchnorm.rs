use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{cast_array, flat, flat_mut, Parameters, Real};
use crate::error::{Error, Result};

/// Batch normalization over the batch axis.
///
/// Training mode normalizes with the (biased) batch statistics and moves
/// the running statistics toward them:
/// `running = momentum · running + (1 − momentum) · batch`.
/// Inference mode uses the running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
    pub running_mean: Array1<F>,
    pub running_var: Array1<F>,
    pub epsilon: F,
    pub momentum: F,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<F> {
    x_hat: Array2<F>,
    inv_std: Array1<F>,
}

impl<F: Real> BatchNorm<F> {
    pub const EPSILON: f64 = 1e-3;
    pub const MOMENTUM: f64 = 0.99;

    pub fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            epsilon: F::of(Self::EPSILON),
            momentum: F::of(Self::MOMENTUM),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Array2<F>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "batch norm over {} features got {}",
                self.dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward_train(&mut self, x: &Array2<F>) -> Result<(Array2<F>, BatchNormCache<F>)> {
        self.check(x)?;
        let n = x.nrows();
        if n < 2 {
            return Err(Error::Statistics(format!(
                "batch normalization needs at least 2 rows in training, got {n}"
            )));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
        let centered = x - &mean;
        let var = centered
            .mapv(|v| v * v)
            .mean_axis(Axis(0))
            .expect("non-empty batch");
        let inv_std = var.mapv(|v| F::one() / (v + self.epsilon).sqrt());
        let x_hat = &centered * &inv_std;
        let y = &x_hat * &self.gamma + &self.beta;

        let m = self.momentum;
        let rest = F::one() - m;
        self.running_mean = &self.running_mean * m + &mean * rest;
        self.running_var = &self.running_var * m + &var * rest;
        Ok((y, BatchNormCache { x_hat, inv_std }))
    }

    pub fn forward_infer(&self, x: &Array2<F>) -> Result<Array2<F>> {
        self.check(x)?;
        let inv_std = self
            .running_var
            .mapv(|v| F::one() / (v + self.epsilon).sqrt());
        Ok((x - &self.running_mean) * &inv_std * &self.gamma + &self.beta)
    }

    /// Gradient through training-mode normalization.
    pub fn backward(
        &self,
        cache: &BatchNormCache<F>,
        dy: &Array2<F>,
        grad: &mut BatchNorm<F>,
    ) -> Array2<F> {
        let n = F::of(dy.nrows() as f64);
        grad.gamma += &(dy * &cache.x_hat).sum_axis(Axis(0));
        grad.beta += &dy.sum_axis(Axis(0));
        let dx_hat = dy * &self.gamma;
        let sum_dx_hat = dx_hat.sum_axis(Axis(0));
        let sum_dx_hat_xhat = (&dx_hat * &cache.x_hat).sum_axis(Axis(0));
        let scaled = &dx_hat * n - &sum_dx_hat - &cache.x_hat * &sum_dx_hat_xhat;
        scaled * &(&cache.inv_std / n)
    }

    pub fn cast<G: Real>(&self) -> BatchNorm<G> {
        BatchNorm {
            gamma: cast_array(&self.gamma),
            beta: cast_array(&self.beta),
            running_mean: cast_array(&self.running_mean),
            running_var: cast_array(&self.running_var),
            epsilon: G::of(self.epsilon.to_f64().expect("finite")),
            momentum: G::of(self.momentum.to_f64().expect("finite")),
        }
    }
}

impl<F> Parameters<F> for BatchNorm<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[F])) {
        f("gamma", flat(&self.gamma));
        f("beta", flat(&self.beta));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [F])) {
        f("gamma", flat_mut(&mut self.gamma));
        f("beta", flat_mut(&mut self.beta));
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn standardized_batch_is_unchanged() {
        let mut bn = BatchNorm::<f64>::new(1);
        let x = array![[-1.0], [1.0], [-1.0], [1.0]];
        let (y, _) = bn.forward_train(&x).unwrap();
        let scale = 1.0 / (1.0 + BatchNorm::<f64>::EPSILON).sqrt();
        for (a, b) in y.iter().zip(x.iter()) {
            assert!((a - b * scale).abs() < 1e-12);
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_batch_maps_to_beta() {
        let mut bn = BatchNorm::<f64>::new(2);
        bn.beta = array![0.5, -0.25];
        let x = array![[3.0, 7.0], [3.0, 7.0], [3.0, 7.0]];
        let (y, _) = bn.forward_train(&x).unwrap();
        for row in y.rows() {
            assert_eq!(row.to_vec(), vec![0.5, -0.25]);
        }
    }

    #[test]
    fn single_row_training_batch_fails() {
        let mut bn = BatchNorm::<f32>::new(2);
        assert!(matches!(
            bn.forward_train(&array![[1.0, 2.0]]),
            Err(Error::Statistics(_))
        ));
    }

    #[test]
    fn running_stats_update_and_inference() {
        let mut bn = BatchNorm::<f64>::new(1);
        let x = array![[1.0], [3.0]];
        bn.forward_train(&x).unwrap();
        // batch mean 2, biased var 1
        assert!((bn.running_mean[0] - 0.02).abs() < 1e-15);
        assert!((bn.running_var[0] - (0.99 + 0.01)).abs() < 1e-15);
        bn.gamma[0] = 2.0;
        bn.beta[0] = 0.5;
        let y = bn.forward_infer(&array![[4.0]]).unwrap();
        let expected = (4.0 - 0.02) / (1.0f64 + 1e-3).sqrt() * 2.0 + 0.5;
        assert!((y[[0, 0]] - expected).abs() < 1e-12);
        assert!(bn.running_var.iter().all(|&v| v >= 0.0));
    }
}
