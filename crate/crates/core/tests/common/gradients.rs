//! Finite-difference checks for each layer and the assembled model, in f64.
//!
//! Layers whose output is not a scalar are reduced with a fixed random
//! projection `L = Σ r ⊙ y`, so the upstream gradient is `r`.

use logmend::neural::{
    cross_entropy, gradient_check, softmax_rows, softmax_xent_backward, BatchNorm, Dense,
    Embedding, GradCheckReport, LstmLayer, LstmStack, Parameters,
};
use logmend::repairnet::{RepairModel, Variant};
use ndarray::Array2;
use rand::Rng as _;

use super::{random_samples, randomize, seeded, tiny_arch, vocab};

pub const TOLERANCE: f64 = 1e-4;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn project(y: &Array2<f64>, r: &Array2<f64>) -> f64 {
    (y * r).sum()
}

pub fn embedding() -> GradCheckReport {
    let mut e: Embedding<f64> = Embedding::new(6, 4, &mut seeded(1));
    randomize(&mut e, 0.5, &mut seeded(2));
    let ids = [0, 3, 3, 5, 1];
    let r = random_matrix(ids.len(), 4, 3);
    gradient_check(
        &e,
        |p| {
            let y = p.forward(&ids).unwrap();
            let mut g = p.zeroed();
            p.backward(&ids, r.view(), &mut g);
            (project(&y, &r), g)
        },
        TOLERANCE,
    )
}

pub fn lstm_cell() -> GradCheckReport {
    let mut l: LstmLayer<f64> = LstmLayer::new(3, 4, &mut seeded(4));
    randomize(&mut l, 0.8, &mut seeded(5));
    let x = random_matrix(2, 3, 6);
    let h0 = random_matrix(2, 4, 7);
    let c0 = random_matrix(2, 4, 8);
    let rh = random_matrix(2, 4, 9);
    let rc = random_matrix(2, 4, 10);
    gradient_check(
        &l,
        |p| {
            let (h, c, cache) = p.cell_forward(&x, &h0, &c0).unwrap();
            let mut g = p.zeroed();
            p.cell_backward(&cache, &rh, &rc, &mut g);
            (project(&h, &rh) + project(&c, &rc), g)
        },
        TOLERANCE,
    )
}

pub fn lstm_stack() -> GradCheckReport {
    let mut s: LstmStack<f64> = LstmStack::new(3, &[5, 4], &mut seeded(11));
    randomize(&mut s, 0.8, &mut seeded(12));
    let xs: Vec<Array2<f64>> = (0..3).map(|t| random_matrix(2, 3, 13 + t)).collect();
    let r = random_matrix(2, 4, 20);
    gradient_check(
        &s,
        |p| {
            let (h, cache) = p.forward(&xs).unwrap();
            let mut g = p.zeroed();
            p.backward(&cache, &r, &mut g);
            (project(&h, &r), g)
        },
        TOLERANCE,
    )
}

pub fn batch_norm() -> GradCheckReport {
    let mut bn: BatchNorm<f64> = BatchNorm::new(5);
    randomize(&mut bn, 1.0, &mut seeded(21));
    let x = random_matrix(4, 5, 22);
    let r = random_matrix(4, 5, 23);
    gradient_check(
        &bn,
        |p| {
            let mut p = p.clone();
            let (y, cache) = p.forward_train(&x).unwrap();
            let mut g = p.zeroed();
            p.backward(&cache, &r, &mut g);
            (project(&y, &r), g)
        },
        TOLERANCE,
    )
}

pub fn dense_softmax_xent() -> GradCheckReport {
    let mut d: Dense<f64> = Dense::new(5, 6, &mut seeded(24));
    randomize(&mut d, 0.8, &mut seeded(25));
    let x = random_matrix(3, 5, 26);
    let labels = [2, 5, 3];
    gradient_check(
        &d,
        |p| {
            let probs = softmax_rows(&p.forward(&x).unwrap());
            let loss = probs
                .rows()
                .into_iter()
                .zip(&labels)
                .map(|(row, &y)| cross_entropy(row, y))
                .sum::<f64>()
                / labels.len() as f64;
            let mut g = p.zeroed();
            p.backward(&x, &softmax_xent_backward(&probs, &labels), &mut g);
            (loss, g)
        },
        TOLERANCE,
    )
}

/// The assembled network, dropout on with a fixed mask seed.
pub fn full_model(variant: Variant) -> GradCheckReport {
    let k = 3;
    let v = vocab(6, 4);
    let arch = variant.apply(&tiny_arch(k));
    let mut m: RepairModel<f64> = RepairModel::new(&arch, &v, &mut seeded(30)).unwrap();
    randomize(&mut m, 0.5, &mut seeded(31));
    let samples = random_samples(4, k, &v, &mut seeded(32));
    let batch: Vec<_> = samples.iter().collect();
    gradient_check(
        &m,
        |p| {
            let mut p = p.clone();
            let (loss, g) = p.loss_and_grad(&batch, &mut seeded(33)).unwrap();
            (loss, g)
        },
        TOLERANCE,
    )
}

/// Every check, labelled.
pub fn all() -> Vec<(String, GradCheckReport)> {
    let mut out = vec![
        ("embedding".to_string(), embedding()),
        ("lstm cell".to_string(), lstm_cell()),
        ("lstm stack".to_string(), lstm_stack()),
        ("batch norm".to_string(), batch_norm()),
        ("dense+softmax+xent".to_string(), dense_softmax_xent()),
    ];
    for v in [Variant::Full, Variant::PrefixOnly, Variant::SuffixOnly] {
        out.push((format!("model {}", v.name()), full_model(v)));
    }
    out
}
