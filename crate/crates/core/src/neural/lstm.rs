//! LSTM cell and stacked, unrolled LSTM.
//!
//! For each step, with `∘` the elementwise product:
//!
//! ```text
//! f  = σ(U_f h + W_f x + b_f)        forget gate
//! i  = σ(U_i h + W_i x + b_i)        input gate
//! c̃  = tanh(U_g h + W_g x + b_g)     candidate cell
//! c' = f ∘ c + i ∘ c̃
//! o  = σ(U_o h + W_o x + b_o)        output gate
//! h' = o ∘ tanh(c')
//! ```
//!
//! The four gates are stacked row-wise in the order f, i, g, o so that one
//! matrix product per operand computes all pre-activations at once.

use ndarray::{linalg::general_mat_mul, s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::{
    cast_array, flat, flat_mut, init, sigmoid, visit_child, visit_child_mut, Parameters, Real,
};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Cell = 2,
    Output = 3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer<F> {
    /// Input weights `[W_f; W_i; W_g; W_o]`, `4h × input`.
    pub w: Array2<F>,
    /// Recurrent weights `[U_f; U_i; U_g; U_o]`, `4h × h`.
    pub u: Array2<F>,
    /// Biases `[b_f; b_i; b_g; b_o]`, `4h`.
    pub b: Array1<F>,
}

/// Activations kept from one cell step for the backward pass.
#[derive(Debug, Clone)]
pub struct CellCache<F> {
    x: Array2<F>,
    h_prev: Array2<F>,
    c_prev: Array2<F>,
    /// Post-activation gates `[f, i, c̃, o]`, `batch × 4h`.
    gates: Array2<F>,
    tanh_c: Array2<F>,
}

impl<F> CellCache<F> {
    pub fn gates(&self) -> ArrayView2<'_, F> {
        self.gates.view()
    }
}

impl<F: Real> LstmLayer<F> {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        LstmLayer {
            w: init::glorot_uniform(4 * hidden, input, input, 4 * hidden, rng),
            u: init::glorot_uniform(4 * hidden, hidden, hidden, 4 * hidden, rng),
            b: init::zeros(4 * hidden),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayer {
            w: Array2::zeros((4 * hidden, input)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.w.ncols()
    }

    fn rows(&self, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden();
        let g = gate as usize;
        g * h..(g + 1) * h
    }

    /// `W_gate`, `h × input`.
    pub fn gate_input_weights(&self, gate: Gate) -> ArrayView2<'_, F> {
        self.w.slice(s![self.rows(gate), ..])
    }

    /// `U_gate`, `h × h`.
    pub fn gate_recurrent_weights(&self, gate: Gate) -> ArrayView2<'_, F> {
        self.u.slice(s![self.rows(gate), ..])
    }

    pub fn gate_bias(&self, gate: Gate) -> ArrayView1<'_, F> {
        self.b.slice(s![self.rows(gate)])
    }

    fn check_shapes(&self) -> Result<()> {
        let h = self.hidden();
        if self.u.nrows() != 4 * h || self.w.nrows() != 4 * h || self.b.len() != 4 * h {
            return Err(Error::Shape(format!(
                "inconsistent LSTM parameters: w {:?}, u {:?}, b {}",
                self.w.dim(),
                self.u.dim(),
                self.b.len()
            )));
        }
        Ok(())
    }

    /// One step for a batch. Returns `(h, c, cache)`.
    pub fn cell_forward(
        &self,
        x: &Array2<F>,
        h_prev: &Array2<F>,
        c_prev: &Array2<F>,
    ) -> Result<(Array2<F>, Array2<F>, CellCache<F>)> {
        self.check_shapes()?;
        let (batch, h) = (x.nrows(), self.hidden());
        if x.ncols() != self.input_size() {
            return Err(Error::Shape(format!(
                "LSTM input has {} features, layer expects {}",
                x.ncols(),
                self.input_size()
            )));
        }
        if h_prev.dim() != (batch, h) || c_prev.dim() != (batch, h) {
            return Err(Error::Shape(format!(
                "LSTM state shapes {:?}/{:?}, expected {:?}",
                h_prev.dim(),
                c_prev.dim(),
                (batch, h)
            )));
        }

        let mut z = Array2::zeros((batch, 4 * h));
        z += &self.b;
        general_mat_mul(F::one(), x, &self.w.t(), F::one(), &mut z);
        general_mat_mul(F::one(), h_prev, &self.u.t(), F::one(), &mut z);
        z.slice_mut(s![.., 0..2 * h]).mapv_inplace(sigmoid);
        z.slice_mut(s![.., 2 * h..3 * h]).mapv_inplace(F::tanh);
        z.slice_mut(s![.., 3 * h..]).mapv_inplace(sigmoid);

        let mut c = Array2::zeros((batch, h));
        Zip::from(&mut c)
            .and(z.slice(s![.., 0..h]))
            .and(z.slice(s![.., h..2 * h]))
            .and(z.slice(s![.., 2 * h..3 * h]))
            .and(c_prev)
            .for_each(|c, &f, &i, &g, &cp| *c = f * cp + i * g);
        let tanh_c = c.mapv(F::tanh);
        let h_out = &z.slice(s![.., 3 * h..]) * &tanh_c;
        let cache = CellCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            gates: z,
            tanh_c,
        };
        Ok((h_out, c, cache))
    }

    /// Back-propagate `dh`/`dc` (gradients w.r.t. this step's outputs).
    /// Accumulates parameter gradients into `grad` and returns
    /// `(dx, dh_prev, dc_prev)`.
    pub fn cell_backward(
        &self,
        cache: &CellCache<F>,
        dh: &Array2<F>,
        dc: &Array2<F>,
        grad: &mut LstmLayer<F>,
    ) -> (Array2<F>, Array2<F>, Array2<F>) {
        let h = self.hidden();
        let batch = dh.nrows();
        let one = F::one();
        let gates = flat(&cache.gates);
        let tanh_c = flat(&cache.tanh_c);
        let c_prev = flat(&cache.c_prev);
        let dh = dh.as_standard_layout();
        let dc = dc.as_standard_layout();
        let (dh, dc) = (
            dh.as_slice().expect("standard"),
            dc.as_slice().expect("standard"),
        );
        let mut dz = Array2::zeros((batch, 4 * h));
        let mut dc_prev = Array2::zeros((batch, h));
        {
            let dzs = flat_mut(&mut dz);
            let dcp = flat_mut(&mut dc_prev);
            for r in 0..batch {
                let gr = &gates[r * 4 * h..(r + 1) * 4 * h];
                let zr = &mut dzs[r * 4 * h..(r + 1) * 4 * h];
                for j in 0..h {
                    let n = r * h + j;
                    let (f, i, g, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                    let tc = tanh_c[n];
                    let dct = dc[n] + dh[n] * o * (one - tc * tc);
                    zr[j] = dct * c_prev[n] * f * (one - f);
                    zr[h + j] = dct * g * i * (one - i);
                    zr[2 * h + j] = dct * i * (one - g * g);
                    zr[3 * h + j] = dh[n] * tc * o * (one - o);
                    dcp[n] = dct * f;
                }
            }
        }
        general_mat_mul(one, &dz.t(), &cache.x, one, &mut grad.w);
        general_mat_mul(one, &dz.t(), &cache.h_prev, one, &mut grad.u);
        grad.b += &dz.sum_axis(Axis(0));
        let dx = dz.dot(&self.w);
        let dh_prev = dz.dot(&self.u);
        (dx, dh_prev, dc_prev)
    }

    pub fn cast<G: Real>(&self) -> LstmLayer<G> {
        LstmLayer {
            w: cast_array(&self.w),
            u: cast_array(&self.u),
            b: cast_array(&self.b),
        }
    }
}

impl<F> Parameters<F> for LstmLayer<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[F])) {
        f("w", flat(&self.w));
        f("u", flat(&self.u));
        f("b", flat(&self.b));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [F])) {
        f("w", flat_mut(&mut self.w));
        f("u", flat_mut(&mut self.u));
        f("b", flat_mut(&mut self.b));
    }
}

/// Layers applied in sequence; layer `l+1` reads layer `l`'s hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmStack<F> {
    pub layers: Vec<LstmLayer<F>>,
}

/// Per-layer, per-step caches.
#[derive(Debug, Clone)]
pub struct StackCache<F> {
    steps: Vec<Vec<CellCache<F>>>,
}

impl<F: Real> LstmStack<F> {
    pub fn new(input: usize, sizes: &[usize], rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(sizes.len());
        let mut prev = input;
        for &h in sizes {
            layers.push(LstmLayer::new(prev, h, rng));
            prev = h;
        }
        LstmStack { layers }
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, LstmLayer::hidden)
    }

    /// Unroll over `inputs` from zero state; returns the top layer's last
    /// hidden state.
    pub fn forward(&self, inputs: &[Array2<F>]) -> Result<(Array2<F>, StackCache<F>)> {
        if self.layers.is_empty() {
            return Err(Error::Shape("LSTM stack has no layers".into()));
        }
        if inputs.is_empty() {
            return Err(Error::Shape("LSTM input sequence is empty".into()));
        }
        let batch = inputs[0].nrows();
        let mut seq: Vec<Array2<F>> = inputs.to_vec();
        let mut steps = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut h = Array2::zeros((batch, layer.hidden()));
            let mut c = Array2::zeros((batch, layer.hidden()));
            let mut caches = Vec::with_capacity(seq.len());
            let mut outputs = Vec::with_capacity(seq.len());
            for x in &seq {
                let (h2, c2, cache) = layer.cell_forward(x, &h, &c)?;
                h = h2;
                c = c2;
                outputs.push(h.clone());
                caches.push(cache);
            }
            steps.push(caches);
            seq = outputs;
        }
        let last = seq.pop().expect("non-empty sequence");
        Ok((last, StackCache { steps }))
    }

    /// Back-propagation through time from a gradient on the final hidden
    /// state. Returns the gradient for each input step.
    pub fn backward(
        &self,
        cache: &StackCache<F>,
        d_final: &Array2<F>,
        grad: &mut LstmStack<F>,
    ) -> Vec<Array2<F>> {
        let k = cache.steps[0].len();
        let batch = d_final.nrows();
        // gradient arriving at each step's hidden output from above
        let mut d_out: Vec<Option<Array2<F>>> = vec![None; k];
        d_out[k - 1] = Some(d_final.clone());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let h = layer.hidden();
            let mut dh_next = Array2::zeros((batch, h));
            let mut dc_next = Array2::zeros((batch, h));
            let mut d_in: Vec<Option<Array2<F>>> = vec![None; k];
            for t in (0..k).rev() {
                if let Some(d) = &d_out[t] {
                    dh_next += d;
                }
                let (dx, dh_prev, dc_prev) = layer.cell_backward(
                    &cache.steps[l][t],
                    &dh_next,
                    &dc_next,
                    &mut grad.layers[l],
                );
                d_in[t] = Some(dx);
                dh_next = dh_prev;
                dc_next = dc_prev;
            }
            d_out = d_in;
        }
        d_out
            .into_iter()
            .map(|d| d.expect("every step visited"))
            .collect()
    }

    pub fn cast<G: Real>(&self) -> LstmStack<G> {
        LstmStack {
            layers: self.layers.iter().map(LstmLayer::cast).collect(),
        }
    }
}

impl<F> Parameters<F> for LstmStack<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[F])) {
        for (i, l) in self.layers.iter().enumerate() {
            visit_child(&format!("layer{i}"), l, f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [F])) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            visit_child_mut(&format!("layer{i}"), l, f);
        }
    }
}
