//! The dual-context repair network: architecture, training and repair.
//!
//! ```text
//! prefix ids ─ embed ─ dropout ─ LSTM ─ LSTM ─┐
//! suffix ids ─ embed ─ dropout ─ LSTM ─ LSTM ─┼─ concat ─ batch norm ─ dense ─ softmax
//! attributes ─ embed ─ dropout ───────────────┘
//! ```
//!
//! Prefix and suffix have separate embedding tables and LSTM weights.
//! Switching a branch off removes it from the concatenation, which is how
//! the prefix-only, suffix-only and no-attribute baselines are built.

mod checkpoint;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::dataset::{build_repair_set, ContextConfig};
use crate::error::{Error, Result};
use crate::eventlog::EventLog;

pub use self::checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use self::model::{Branch, ForwardCache, RepairModel};
pub use self::train::{split_indices, train, write_history_csv, EpochRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub embedding_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    /// Prefix and suffix length.
    pub k: usize,
    pub activity_embedding_dim: usize,
    pub attributes: Vec<AttributeSpec>,
    /// Hidden sizes of the LSTM layers, shared by both branches.
    pub lstm_layer_sizes: Vec<usize>,
    /// Applied to every embedding output during training.
    pub dropout_rate: f64,
    pub use_prefix: bool,
    pub use_suffix: bool,
    pub use_attributes: bool,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            k: 5,
            activity_embedding_dim: 100,
            attributes: vec![AttributeSpec {
                name: "resource".into(),
                embedding_dim: 16,
            }],
            lstm_layer_sizes: vec![32, 16],
            dropout_rate: 0.2,
            use_prefix: true,
            use_suffix: true,
            use_attributes: true,
        }
    }
}

impl ArchitectureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.use_prefix || self.use_suffix) {
            return Err(Error::Config(
                "at least one of prefix/suffix must be used".into(),
            ));
        }
        if self.k == 0 || self.activity_embedding_dim == 0 {
            return Err(Error::Config(
                "k and embedding dimension must be positive".into(),
            ));
        }
        if self.lstm_layer_sizes.is_empty() || self.lstm_layer_sizes.contains(&0) {
            return Err(Error::Config(
                "LSTM layer sizes must be non-empty and positive".into(),
            ));
        }
        if self.attributes.iter().any(|a| a.embedding_dim == 0) {
            return Err(Error::Config(
                "attribute embedding dimensions must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} not in [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn context(&self) -> ContextConfig {
        ContextConfig::new(self.k).expect("validated k")
    }

    pub fn attribute_names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }
}

/// Model variants compared in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    PrefixOnly,
    SuffixOnly,
    NoAttributes,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::PrefixOnly,
        Variant::SuffixOnly,
        Variant::NoAttributes,
        Variant::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::PrefixOnly => "prefix_only",
            Variant::SuffixOnly => "suffix_only",
            Variant::NoAttributes => "no_attributes",
        }
    }

    pub fn apply(self, base: &ArchitectureConfig) -> ArchitectureConfig {
        let (p, s, a) = match self {
            Variant::Full => (true, true, true),
            Variant::PrefixOnly => (true, false, false),
            Variant::SuffixOnly => (false, true, false),
            Variant::NoAttributes => (true, true, false),
        };
        ArchitectureConfig {
            use_prefix: p,
            use_suffix: s,
            use_attributes: a,
            ..base.clone()
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs without validation-loss improvement before stopping.
    pub early_stop_patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 100,
            early_stop_patience: 10,
            batch_size: 32,
            learning_rate: 0.002,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction {} not in (0, 1)",
                self.validation_fraction
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Fill every missing activity with the model's most probable label.
///
/// Each missing event is predicted from the log as given, so neighbours
/// that are themselves missing are seen as missing; predictions are not fed
/// back. Labels are chosen among real activities only, ties going to the
/// lowest id.
pub fn repair(log: &EventLog, cp: &Checkpoint, cfg: ContextConfig) -> Result<EventLog> {
    if cfg.k() != cp.architecture.k {
        return Err(Error::Config(format!(
            "context length {} differs from the checkpoint's {}",
            cfg.k(),
            cp.architecture.k
        )));
    }
    let samples = build_repair_set(log, &cp.vocab, cfg, &cp.architecture.attribute_names());
    if samples.is_empty() {
        return Ok(log.clone());
    }
    let predictions = cp.model.predict(&samples)?;
    let mut out = log.clone();
    for (s, id) in samples.iter().zip(predictions) {
        let label = cp
            .vocab
            .decode_activity(id)
            .expect("predictions are non-reserved ids")
            .to_string();
        out.set_activity(&s.origin.0, s.origin.1, Some(label))?;
    }
    Ok(out)
}
