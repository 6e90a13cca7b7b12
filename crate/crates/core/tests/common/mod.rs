//! Fixtures and independent oracles shared by the integration tests.

#![allow(dead_code)]

pub mod gradients;
pub mod oracle;

use logmend::dataset::{CategoryMap, EncodedSample, Vocabulary};
use logmend::neural::Parameters;
use logmend::repairnet::{ArchitectureConfig, AttributeSpec};
use logmend::rng::{self, Rng};
use rand::Rng as _;

/// Activity vocabulary `A0..A{n}` and one `resource` attribute `R0..R{m}`.
pub fn vocab(activities: usize, resources: usize) -> Vocabulary {
    let acts: Vec<String> = (0..activities).map(|i| format!("A{i}")).collect();
    let res: Vec<String> = (0..resources).map(|i| format!("R{i}")).collect();
    Vocabulary {
        activities: CategoryMap::from(acts),
        attributes: [("resource".to_string(), CategoryMap::from(res))]
            .into_iter()
            .collect(),
    }
}

/// A small architecture for gradient and oracle checks.
pub fn tiny_arch(k: usize) -> ArchitectureConfig {
    ArchitectureConfig {
        k,
        activity_embedding_dim: 4,
        attributes: vec![AttributeSpec {
            name: "resource".into(),
            embedding_dim: 3,
        }],
        lstm_layer_sizes: vec![5, 4],
        dropout_rate: 0.2,
        ..ArchitectureConfig::default()
    }
}

pub fn random_samples(n: usize, k: usize, vocab: &Vocabulary, rng: &mut Rng) -> Vec<EncodedSample> {
    let n_act = vocab.activity_count();
    let n_res = vocab.attributes["resource"].size();
    (0..n)
        .map(|i| EncodedSample {
            prefix_ids: (0..k).map(|_| rng.random_range(0..n_act)).collect(),
            suffix_ids: (0..k).map(|_| rng.random_range(0..n_act)).collect(),
            attribute_ids: vec![rng.random_range(0..n_res)],
            label_id: Some(rng.random_range(2..n_act)),
            origin: (format!("c{i}"), 0),
        })
        .collect()
}

/// Replace every trainable value by a draw from U(-scale, scale).
pub fn randomize<P: Parameters<f64>>(params: &mut P, scale: f64, rng: &mut Rng) {
    params.visit_mut(&mut |_, s| {
        for v in s {
            *v = rng.random_range(-scale..scale);
        }
    });
}

pub fn seeded(seed: u64) -> Rng {
    rng::seeded(seed)
}
