use ndarray::{Array2, ArrayView2};

use super::{cast_array, flat, flat_mut, init, Parameters, Real};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Lookup table mapping ids to dense rows.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Embedding<F> {
    /// `vocab × dim`. Row 0 (padding) is trained like any other.
    pub table: Array2<F>,
}

impl<F: Real> Embedding<F> {
    pub const INIT_LIMIT: f64 = 0.05;

    pub fn new(vocab: usize, dim: usize, rng: &mut Rng) -> Self {
        Embedding {
            table: init::uniform(vocab, dim, Self::INIT_LIMIT, rng),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.nrows()
    }

    pub fn dim(&self) -> usize {
        self.table.ncols()
    }

    /// Rows for `ids`, one per batch element.
    pub fn forward(&self, ids: &[usize]) -> Result<Array2<F>> {
        let mut out = Array2::zeros((ids.len(), self.dim()));
        for (mut row, &id) in out.rows_mut().into_iter().zip(ids) {
            if id >= self.vocab_size() {
                return Err(Error::Encoding(format!(
                    "id {id} outside embedding of size {}",
                    self.vocab_size()
                )));
            }
            row.assign(&self.table.row(id));
        }
        Ok(out)
    }

    /// Scatter-add `grad_out` rows into the table gradient.
    pub fn backward(&self, ids: &[usize], grad_out: ArrayView2<'_, F>, grad: &mut Embedding<F>) {
        for (row, &id) in grad_out.rows().into_iter().zip(ids) {
            let mut g = grad.table.row_mut(id);
            g += &row;
        }
    }

    pub fn cast<G: Real>(&self) -> Embedding<G> {
        Embedding {
            table: cast_array(&self.table),
        }
    }
}

impl<F> Parameters<F> for Embedding<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[F])) {
        f("table", flat(&self.table));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [F])) {
        f("table", flat_mut(&mut self.table));
    }
}
