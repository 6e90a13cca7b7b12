use std::collections::BTreeSet;
use std::io::Write;

use log::info;
use serde::{Deserialize, Serialize};

use super::model::{argmax_label, labels_of, mean_loss};
use super::{ArchitectureConfig, Checkpoint, RepairModel, TrainConfig};
use crate::dataset::{EncodedSample, Vocabulary};
use crate::error::{Error, Result};
use crate::neural::{Nadam, NadamConfig};
use crate::rng::{self, Rng};

/// Smallest training set `train` accepts.
pub const MIN_SAMPLES: usize = 10;

/// Salt separating the weight/dropout stream from the shuffling stream.
const INIT_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training-mode loss over the epoch's minibatches.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Shuffle `0..n` and cut it into training and validation indices, the
/// validation part being the last `fraction` of the shuffled order.
pub fn split_indices(n: usize, fraction: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut idx, rng);
    let cut = ((n as f64) * (1.0 - fraction) + 1e-9).floor() as usize;
    let val = idx.split_off(cut.min(n));
    (idx, val)
}

/// Minibatch boundaries over `n` items. A trailing batch of one is folded
/// into the previous batch since batch statistics need two rows.
fn batch_ranges(n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> =
        (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").end = last.end;
    }
    out
}

fn evaluate(model: &RepairModel<f32>, samples: &[EncodedSample]) -> Result<(f64, f64)> {
    let labels: Vec<usize> = labels_of(&samples.iter().collect::<Vec<_>>())?;
    let probs = model.predict_proba(samples)?;
    let loss = f64::from(mean_loss(&probs, &labels));
    let correct = probs
        .rows()
        .into_iter()
        .zip(&labels)
        .filter(|(row, &y)| argmax_label(row.as_slice().expect("row-major")) == y)
        .count();
    Ok((loss, correct as f64 / labels.len() as f64))
}

/// Fit a repair model on labeled samples.
///
/// Samples are shuffled with the configured seed and the tail of the
/// shuffled order is held out for validation. Training stops once the
/// validation loss has not improved for `early_stop_patience` epochs; the
/// returned checkpoint holds the weights of the best epoch.
pub fn train(
    samples: &[EncodedSample],
    vocab: &Vocabulary,
    arch: &ArchitectureConfig,
    tc: &TrainConfig,
) -> Result<Checkpoint> {
    arch.validate()?;
    tc.validate()?;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Training(format!(
            "{} training samples, need at least {MIN_SAMPLES}",
            samples.len()
        )));
    }
    let all: Vec<&EncodedSample> = samples.iter().collect();
    let labels = labels_of(&all)?;
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Training(
            "training data has fewer than 2 distinct labels".into(),
        ));
    }

    let mut shuffle_rng = rng::seeded(tc.seed);
    let mut model_rng = rng::seeded(tc.seed ^ INIT_SALT);
    let (mut train_idx, val_idx) =
        split_indices(samples.len(), tc.validation_fraction, &mut shuffle_rng);
    if train_idx.len() < 2 || val_idx.is_empty() {
        return Err(Error::Training(format!(
            "split of {} samples leaves {} for training and {} for validation",
            samples.len(),
            train_idx.len(),
            val_idx.len()
        )));
    }
    let val: Vec<EncodedSample> = val_idx.iter().map(|&i| samples[i].clone()).collect();

    let mut model: RepairModel<f32> = RepairModel::new(arch, vocab, &mut model_rng)?;
    let mut opt = Nadam::new(NadamConfig {
        learning_rate: tc.learning_rate,
        ..NadamConfig::default()
    });
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut wait = 0;
    let mut history = Vec::new();

    for epoch in 1..=tc.max_epochs {
        rng::shuffle(&mut train_idx, &mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for range in batch_ranges(train_idx.len(), tc.batch_size) {
            let batch: Vec<&EncodedSample> =
                train_idx[range].iter().map(|&i| &samples[i]).collect();
            let y = labels_of(&batch)?;
            let (probs, cache) = model.forward_train(&batch, &mut model_rng)?;
            loss_sum += f64::from(mean_loss(&probs, &y)) * batch.len() as f64;
            correct += probs
                .rows()
                .into_iter()
                .zip(&y)
                .filter(|(row, &l)| argmax_label(row.as_slice().expect("row-major")) == l)
                .count();
            let grad = model.backward(&cache, &y);
            opt.step(&mut model, &grad);
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Training(format!(
                "training loss diverged at epoch {epoch}"
            )));
        }
        let (val_loss, val_accuracy) = evaluate(&model, &val)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            train_accuracy: correct as f64 / train_idx.len() as f64,
            val_loss,
            val_accuracy,
        };
        info!(
            "epoch {epoch}: train_loss={:.4} train_acc={:.4} val_loss={:.4} val_acc={:.4}",
            record.train_loss, record.train_accuracy, record.val_loss, record.val_accuracy
        );
        history.push(record);
        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best = model.clone();
            wait = 0;
        } else {
            wait += 1;
        }
        if wait >= tc.early_stop_patience {
            break;
        }
    }

    Ok(Checkpoint {
        architecture: arch.clone(),
        train_config: tc.clone(),
        optimizer: opt.config,
        model: best,
        vocab: vocab.clone(),
        history,
        best_epoch,
    })
}

/// Columns: epoch, train_loss, val_loss, val_accuracy.
pub fn write_history_csv<W: Write>(history: &[EpochRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_loss", "val_loss", "val_accuracy"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_loss.to_string(),
            r.val_accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
