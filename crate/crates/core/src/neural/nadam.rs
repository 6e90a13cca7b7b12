//! Nesterov-accelerated Adam with a momentum schedule.
//!
//! Step `t` (1-based), gradient `g`:
//!
//! ```text
//! μ_t   = β1 · (1 − ½ · 0.96^(0.004·t))
//! Π_t   = Π_{t−1} · μ_t                      (Π_0 = 1)
//! m     = β1·m + (1 − β1)·g
//! v     = β2·v + (1 − β2)·g²
//! ĝ     = g / (1 − Π_t)
//! m̂     = m / (1 − Π_t · μ_{t+1})
//! v̂     = v / (1 − β2^t)
//! m̄     = (1 − μ_t)·ĝ + μ_{t+1}·m̂
//! θ    −= lr · m̄ / (√v̂ + ε)
//! ```

use serde::{Deserialize, Serialize};

use super::{Parameters, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NadamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule_decay: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        NadamConfig {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            schedule_decay: 0.004,
        }
    }
}

impl NadamConfig {
    fn momentum_at(&self, t: u64) -> f64 {
        self.beta1 * (1.0 - 0.5 * 0.96f64.powf(self.schedule_decay * t as f64))
    }
}

#[derive(Debug, Clone)]
pub struct Nadam<F> {
    pub config: NadamConfig,
    step: u64,
    m_schedule: f64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> Nadam<F> {
    pub fn new(config: NadamConfig) -> Self {
        Nadam {
            config,
            step: 0,
            m_schedule: 1.0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update of every tensor in `params` using the matching tensor
    /// of `grads` (same visitation order and sizes).
    pub fn step<P: Parameters<F>>(&mut self, params: &mut P, grads: &P) {
        let mut flat_grads: Vec<Vec<F>> = Vec::new();
        grads.visit(&mut |_, g| flat_grads.push(g.to_vec()));
        if self.m.is_empty() {
            self.m = flat_grads
                .iter()
                .map(|g| vec![F::zero(); g.len()])
                .collect();
            self.v = self.m.clone();
        }
        assert_eq!(
            self.m.len(),
            flat_grads.len(),
            "parameter set changed between steps"
        );

        let c = self.config;
        self.step += 1;
        let t = self.step;
        let mu_t = c.momentum_at(t);
        let mu_next = c.momentum_at(t + 1);
        self.m_schedule *= mu_t;
        let sched_next = self.m_schedule * mu_next;

        let b1 = F::of(c.beta1);
        let b2 = F::of(c.beta2);
        let g_scale = F::of(1.0 / (1.0 - self.m_schedule));
        let m_scale = F::of(1.0 / (1.0 - sched_next));
        let v_scale = F::of(1.0 / (1.0 - c.beta2.powf(t as f64)));
        let w_g = F::of(1.0 - mu_t);
        let w_m = F::of(mu_next);
        let lr = F::of(c.learning_rate);
        let eps = F::of(c.epsilon);
        let one = F::one();

        let mut idx = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        params.visit_mut(&mut |_, p| {
            let g = &flat_grads[idx];
            let m = &mut ms[idx];
            let v = &mut vs[idx];
            assert_eq!(p.len(), g.len(), "gradient shape mismatch");
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = b1 * m[j] + (one - b1) * gj;
                v[j] = b2 * v[j] + (one - b2) * gj * gj;
                let m_bar = w_g * gj * g_scale + w_m * m[j] * m_scale;
                p[j] -= lr * m_bar / ((v[j] * v_scale).sqrt() + eps);
            }
            idx += 1;
        });
    }
}
