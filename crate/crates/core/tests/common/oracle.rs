//! Straight-line re-evaluation of the repair network for one sample, in
//! inference mode, written with plain loops and no shared code.

use logmend::dataset::EncodedSample;
use logmend::neural::{LstmLayer, Parameters};
use logmend::repairnet::{Branch, RepairModel, Variant};
use rand::Rng as _;

use super::{random_samples, randomize, seeded, tiny_arch, vocab};

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM step. Gate rows are stored as forget, input, candidate, output.
fn cell(layer: &LstmLayer<f64>, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let pre = |gate: usize, j: usize| {
        let row = gate * n + j;
        let mut z = layer.b[row];
        for (q, xv) in x.iter().enumerate() {
            z += layer.w[[row, q]] * xv;
        }
        for (q, hv) in h.iter().enumerate() {
            z += layer.u[[row, q]] * hv;
        }
        z
    };
    let mut h_new = vec![0.0; n];
    let mut c_new = vec![0.0; n];
    for j in 0..n {
        let f = sig(pre(0, j));
        let i = sig(pre(1, j));
        let g = pre(2, j).tanh();
        let o = sig(pre(3, j));
        c_new[j] = f * c[j] + i * g;
        h_new[j] = o * c_new[j].tanh();
    }
    (h_new, c_new)
}

fn branch(b: &Branch<f64>, ids: &[usize]) -> Vec<f64> {
    let mut seq: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| b.embedding.table.row(id).to_vec())
        .collect();
    for layer in &b.lstm.layers {
        let n = layer.b.len() / 4;
        let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
        let mut out = Vec::new();
        for x in &seq {
            (h, c) = cell(layer, x, &h, &c);
            out.push(h.clone());
        }
        seq = out;
    }
    seq.pop().expect("k >= 1")
}

pub fn forward(model: &RepairModel<f64>, s: &EncodedSample) -> Vec<f64> {
    let mut v = Vec::new();
    if let Some(b) = &model.prefix {
        v.extend(branch(b, &s.prefix_ids));
    }
    if let Some(b) = &model.suffix {
        v.extend(branch(b, &s.suffix_ids));
    }
    for (a, table) in model.attributes.iter().enumerate() {
        v.extend(table.table.row(s.attribute_ids[a]).iter());
    }
    let bn = &model.norm;
    for (j, x) in v.iter_mut().enumerate() {
        *x = bn.gamma[j] * (*x - bn.running_mean[j]) / (bn.running_var[j] + bn.epsilon).sqrt()
            + bn.beta[j];
    }
    let d = &model.output;
    let logits: Vec<f64> = (0..d.bias.len())
        .map(|r| d.bias[r] + (0..v.len()).map(|q| d.weight[[r, q]] * v[q]).sum::<f64>())
        .collect();
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Largest absolute difference between the model and the oracle over
/// `draws` random models, each evaluated on a small batch.
pub fn max_error(draws: u64) -> f64 {
    let mut worst = 0.0f64;
    for d in 0..draws {
        let mut rng = seeded(1000 + d);
        let k = rng.random_range(1..=4);
        let v = vocab(rng.random_range(3..9), rng.random_range(2..5));
        let variant = Variant::ALL[(d % 4) as usize];
        let arch = variant.apply(&tiny_arch(k));
        let mut m: RepairModel<f64> = RepairModel::new(&arch, &v, &mut rng).unwrap();
        randomize(&mut m, 0.7, &mut rng);
        for j in 0..m.norm.dim() {
            m.norm.running_mean[j] = rng.random_range(-0.5..0.5);
            m.norm.running_var[j] = rng.random_range(0.2..2.0);
        }
        let samples = random_samples(3, k, &v, &mut rng);
        let probs = m.predict_proba(&samples).unwrap();
        for (s, row) in samples.iter().zip(probs.rows()) {
            let want = forward(&m, s);
            for (a, b) in row.iter().zip(&want) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(m.num_parameters() > 0);
    }
    worst
}
