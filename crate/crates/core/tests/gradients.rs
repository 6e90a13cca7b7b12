mod common;

use common::gradients;
use logmend::neural::GradCheckReport;

fn assert_passes(name: &str, r: GradCheckReport) {
    assert!(
        r.passed(),
        "{name}: max relative error {:.3e} in {:?}",
        r.max_rel_error(),
        r.worst()
    );
}

#[test]
fn embedding_gradients() {
    assert_passes("embedding", gradients::embedding());
}

#[test]
fn lstm_cell_gradients() {
    assert_passes("lstm cell", gradients::lstm_cell());
}

#[test]
fn lstm_stack_gradients() {
    assert_passes("lstm stack", gradients::lstm_stack());
}

#[test]
fn batch_norm_gradients() {
    assert_passes("batch norm", gradients::batch_norm());
}

#[test]
fn dense_softmax_cross_entropy_gradients() {
    assert_passes("dense", gradients::dense_softmax_xent());
}

#[test]
fn assembled_model_gradients() {
    use logmend::repairnet::Variant;
    for v in Variant::ALL {
        assert_passes(v.name(), gradients::full_model(v));
    }
}

#[test]
fn checker_rejects_a_wrong_gradient() {
    use logmend::neural::{gradient_check, Dense, Parameters};
    let d: Dense<f64> = Dense::new(3, 3, &mut common::seeded(0));
    let r = gradient_check(
        &d,
        |p| {
            let loss: f64 = p.weight.iter().map(|w| w * w).sum();
            let mut g = p.zeroed();
            g.weight = &p.weight * 2.0;
            g.weight[[1, 2]] += 1e-2;
            (loss, g)
        },
        gradients::TOLERANCE,
    );
    assert!(!r.passed());
    assert_eq!(r.worst().unwrap().name, "weight");
}
