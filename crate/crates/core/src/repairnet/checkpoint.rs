use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchitectureConfig, EpochRecord, RepairModel, TrainConfig};
use crate::dataset::Vocabulary;
use crate::error::{Error, Result};
use crate::neural::{NadamConfig, Parameters};
use crate::rng;

pub const CHECKPOINT_FORMAT: &str = "logmend-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to reload and use it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub architecture: ArchitectureConfig,
    pub train_config: TrainConfig,
    pub optimizer: NadamConfig,
    /// Weights of the best validation epoch, batch-norm statistics included.
    pub model: RepairModel<f32>,
    pub vocab: Vocabulary,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose weights are stored.
    pub best_epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct Envelope<C> {
    format: String,
    version: u32,
    checkpoint: C,
}

impl Checkpoint {
    /// History entry of the stored weights.
    pub fn best_record(&self) -> Option<&EpochRecord> {
        self.history.iter().find(|r| r.epoch == self.best_epoch)
    }

    /// Check that every tensor has the shape implied by the architecture
    /// and vocabulary.
    pub fn validate(&self) -> Result<()> {
        let reference: RepairModel<f32> =
            RepairModel::new(&self.architecture, &self.vocab, &mut rng::seeded(0))?;
        let mut expected = Vec::new();
        reference.visit(&mut |name, v| expected.push((name.to_string(), v.len())));
        let mut found = Vec::new();
        self.model
            .visit(&mut |name, v| found.push((name.to_string(), v.len())));
        if expected != found {
            let diff = expected
                .iter()
                .zip(&found)
                .find(|(a, b)| a != b)
                .map(|(a, b)| {
                    format!(
                        "expected {} with {} values, found {} with {}",
                        a.0, a.1, b.0, b.1
                    )
                })
                .unwrap_or_else(|| {
                    format!("expected {} tensors, found {}", expected.len(), found.len())
                });
            return Err(Error::Consistency(format!(
                "checkpoint does not match its architecture: {diff}"
            )));
        }
        let dim = reference.concat_dim();
        if self.model.norm.running_mean.len() != dim || self.model.norm.running_var.len() != dim {
            return Err(Error::Consistency(
                "batch-norm statistics have the wrong size".into(),
            ));
        }
        if self.model.k != self.architecture.k {
            return Err(Error::Consistency(format!(
                "model context length {} differs from architecture {}",
                self.model.k, self.architecture.k
            )));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let env = Envelope {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            checkpoint: self,
        };
        serde_json::to_writer(out, &env)?;
        Ok(())
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let env: Envelope<serde_json::Value> = serde_json::from_reader(source)?;
        if env.format != CHECKPOINT_FORMAT {
            return Err(Error::Consistency(format!(
                "not a checkpoint: format {:?}",
                env.format
            )));
        }
        if env.version != CHECKPOINT_VERSION {
            return Err(Error::Consistency(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                env.version
            )));
        }
        let cp: Checkpoint = serde_json::from_value(env.checkpoint)?;
        cp.validate()?;
        Ok(cp)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
