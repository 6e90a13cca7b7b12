//! Layers with explicit forward and backward passes.
//!
//! Activations are batch-major `Array2`s (`batch × features`). Every layer
//! owns its parameters in a plain struct, and the same struct type doubles
//! as the gradient accumulator: `backward` adds into a `&mut` copy obtained
//! from [`Parameters::zeroed`]. The [`Parameters`] visitor is what the
//! optimizer and the gradient checker iterate over.
//!
//! Everything is generic over [`Real`] so the same code trains in `f32` and
//! is verified in `f64`.

mod batchnorm;
mod dense;
mod dropout;
mod embedding;
mod gradcheck;
pub mod init;
mod lstm;
mod nadam;

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use self::batchnorm::{BatchNorm, BatchNormCache};
pub use self::dense::{cross_entropy, dense_softmax, softmax_rows, softmax_xent_backward, Dense};
pub use self::dropout::{dropout_backward, dropout_forward};
pub use self::embedding::Embedding;
pub use self::gradcheck::{gradient_check, GradCheckReport, GroupError, FD_STEP};
pub use self::lstm::{CellCache, Gate, LstmLayer, LstmStack, StackCache};
pub use self::nadam::{Nadam, NadamConfig};

/// Floating-point element type of all tensors.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + num_traits::FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn of(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("finite constant")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Named, flat views of every trainable tensor, in a fixed order.
pub trait Parameters<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[F]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [F]));

    /// A copy with every trainable value set to zero, for use as a
    /// gradient accumulator.
    fn zeroed(&self) -> Self
    where
        Self: Clone,
        F: Real,
    {
        let mut g = self.clone();
        g.visit_mut(&mut |_, s| s.fill(F::zero()));
        g
    }

    fn num_parameters(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, s| n += s.len());
        n
    }
}

/// Forward `visit` calls of a child under a dotted name prefix.
pub fn visit_child<F, P: Parameters<F> + ?Sized>(
    prefix: &str,
    child: &P,
    f: &mut dyn FnMut(&str, &[F]),
) {
    child.visit(&mut |name, s| f(&format!("{prefix}.{name}"), s));
}

pub fn visit_child_mut<F, P: Parameters<F> + ?Sized>(
    prefix: &str,
    child: &mut P,
    f: &mut dyn FnMut(&str, &mut [F]),
) {
    child.visit_mut(&mut |name, s| f(&format!("{prefix}.{name}"), s));
}

pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

fn flat<F, D: ndarray::Dimension>(a: &ndarray::Array<F, D>) -> &[F] {
    a.as_slice()
        .expect("parameters are kept in standard layout")
}

fn flat_mut<F, D: ndarray::Dimension>(a: &mut ndarray::Array<F, D>) -> &mut [F] {
    a.as_slice_mut()
        .expect("parameters are kept in standard layout")
}

fn cast_array<F: Real, G: Real, D: ndarray::Dimension>(
    a: &ndarray::Array<F, D>,
) -> ndarray::Array<G, D> {
    a.mapv(|x| G::of(x.to_f64().expect("finite")))
}
