use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::{cast_array, flat, flat_mut, init, Parameters, Real};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Floor applied to probabilities inside the log of the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Fully connected layer, `y = x Wᵀ + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<F> {
    /// `out × in`.
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Real> Dense<F> {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Self {
        Dense {
            weight: init::glorot_uniform(output, input, input, output, rng),
            bias: init::zeros(output),
        }
    }

    pub fn forward(&self, x: &Array2<F>) -> Result<Array2<F>> {
        if x.ncols() != self.weight.ncols() {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.weight.ncols(),
                x.ncols()
            )));
        }
        let mut y = Array2::zeros((x.nrows(), self.weight.nrows()));
        y += &self.bias;
        general_mat_mul(F::one(), x, &self.weight.t(), F::one(), &mut y);
        Ok(y)
    }

    pub fn backward(&self, x: &Array2<F>, d_out: &Array2<F>, grad: &mut Dense<F>) -> Array2<F> {
        general_mat_mul(F::one(), &d_out.t(), x, F::one(), &mut grad.weight);
        grad.bias += &d_out.sum_axis(Axis(0));
        d_out.dot(&self.weight)
    }

    pub fn cast<G: Real>(&self) -> Dense<G> {
        Dense {
            weight: cast_array(&self.weight),
            bias: cast_array(&self.bias),
        }
    }
}

impl<F> Parameters<F> for Dense<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[F])) {
        f("weight", flat(&self.weight));
        f("bias", flat(&self.bias));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [F])) {
        f("weight", flat_mut(&mut self.weight));
        f("bias", flat_mut(&mut self.bias));
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<F: Real>(logits: &Array2<F>) -> Array2<F> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(F::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Dense layer followed by softmax.
pub fn dense_softmax<F: Real>(p: &Dense<F>, x: &Array2<F>) -> Result<Array2<F>> {
    Ok(softmax_rows(&p.forward(x)?))
}

/// `−ln p[label]`, with `p` floored at [`PROB_FLOOR`].
pub fn cross_entropy<F: Real>(probs: ArrayView1<'_, F>, label: usize) -> F {
    -probs[label].max(F::of(PROB_FLOOR)).ln()
}

/// Gradient of the batch-mean cross-entropy w.r.t. the logits:
/// `(p − onehot) / batch`.
pub fn softmax_xent_backward<F: Real>(probs: &Array2<F>, labels: &[usize]) -> Array2<F> {
    let n = F::of(probs.nrows() as f64);
    let mut d = probs.clone();
    for (mut row, &y) in d.rows_mut().into_iter().zip(labels) {
        row[y] -= F::one();
        row.mapv_inplace(|v| v / n);
    }
    d
}
