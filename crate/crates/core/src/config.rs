//! Flat `key = value` run configuration shared by the command line and
//! experiment plan files.
//!
//! ```text
//! # comments start with '#'
//! k = 5
//! lstm_layer_sizes = 32,16
//! attributes = Resource:resource   # column, or column:name
//! ```
//!
//! Every key has a default and [`RunConfig::entries`] lists the effective
//! value of each, so a run can echo its complete configuration.

use std::path::PathBuf;
use std::str::FromStr;

use crate::corruption::Protocol;
use crate::error::{Error, Result};
use crate::evaluation::{ExperimentPlan, MissingLevel};
use crate::eventlog::{ColumnMapping, CsvFormat, DEFAULT_TIMESTAMP_FORMAT};
use crate::repairnet::{ArchitectureConfig, AttributeSpec, TrainConfig, Variant};

/// All keys, in the order [`RunConfig::entries`] reports them.
pub const KEYS: &[&str] = &[
    "case_column",
    "activity_column",
    "timestamp_column",
    "timestamp_format",
    "attributes",
    "k",
    "activity_embedding_dim",
    "attribute_embedding_dim",
    "lstm_layer_sizes",
    "dropout_rate",
    "use_prefix",
    "use_suffix",
    "use_attributes",
    "max_epochs",
    "early_stop_patience",
    "batch_size",
    "learning_rate",
    "validation_fraction",
    "seed",
    "dataset",
    "protocol",
    "levels",
    "repeats",
    "variants",
    "threads",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case_column: String,
    pub activity_column: String,
    pub timestamp_column: Option<String>,
    pub timestamp_format: String,
    /// `(column, attribute name)` pairs.
    pub attributes: Vec<(String, String)>,
    pub k: usize,
    pub activity_embedding_dim: usize,
    pub attribute_embedding_dim: usize,
    pub lstm_layer_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub use_prefix: bool,
    pub use_suffix: bool,
    pub use_attributes: bool,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Corruption seed, training seed, or experiment base seed.
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    pub protocol: Protocol,
    /// Counts for the fixed-count protocol, fractions for proportions.
    pub levels: Vec<String>,
    pub repeats: usize,
    pub variants: Vec<Variant>,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let arch = ArchitectureConfig::default();
        let train = TrainConfig::default();
        let mapping = ColumnMapping::default();
        RunConfig {
            case_column: mapping.case,
            activity_column: mapping.activity,
            timestamp_column: mapping.timestamp,
            timestamp_format: DEFAULT_TIMESTAMP_FORMAT.into(),
            attributes: mapping.attributes,
            k: arch.k,
            activity_embedding_dim: arch.activity_embedding_dim,
            attribute_embedding_dim: arch.attributes[0].embedding_dim,
            lstm_layer_sizes: arch.lstm_layer_sizes,
            dropout_rate: arch.dropout_rate,
            use_prefix: arch.use_prefix,
            use_suffix: arch.use_suffix,
            use_attributes: arch.use_attributes,
            max_epochs: train.max_epochs,
            early_stop_patience: train.early_stop_patience,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            validation_fraction: train.validation_fraction,
            seed: train.seed,
            dataset: None,
            protocol: Protocol::Proportion,
            levels: vec!["0.1".into()],
            repeats: 10,
            variants: vec![Variant::Full],
            threads: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid value {value:?} for {key}, expected true or false"
        ))),
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Set one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "case_column" => self.case_column = v.into(),
            "activity_column" => self.activity_column = v.into(),
            "timestamp_column" => {
                self.timestamp_column = (!v.is_empty() && v != "none").then(|| v.to_string());
            }
            "timestamp_format" => self.timestamp_format = v.into(),
            "attributes" => {
                self.attributes = list(v)
                    .map(|item| match item.split_once(':') {
                        Some((col, name)) => (col.trim().to_string(), name.trim().to_string()),
                        None => (item.to_string(), item.to_string()),
                    })
                    .collect();
            }
            "k" => self.k = parse(key, v)?,
            "activity_embedding_dim" => self.activity_embedding_dim = parse(key, v)?,
            "attribute_embedding_dim" => self.attribute_embedding_dim = parse(key, v)?,
            "lstm_layer_sizes" => {
                self.lstm_layer_sizes = list(v).map(|s| parse(key, s)).collect::<Result<_>>()?;
            }
            "dropout_rate" => self.dropout_rate = parse(key, v)?,
            "use_prefix" => self.use_prefix = parse_bool(key, v)?,
            "use_suffix" => self.use_suffix = parse_bool(key, v)?,
            "use_attributes" => self.use_attributes = parse_bool(key, v)?,
            "max_epochs" => self.max_epochs = parse(key, v)?,
            "early_stop_patience" => self.early_stop_patience = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "validation_fraction" => self.validation_fraction = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "dataset" => self.dataset = (!v.is_empty()).then(|| PathBuf::from(v)),
            "protocol" => {
                self.protocol = match v {
                    "fixed_count" | "fixed" => Protocol::FixedCountOnePerTrace,
                    "proportion" => Protocol::Proportion,
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown protocol {v:?}, expected fixed_count or proportion"
                        )))
                    }
                }
            }
            "levels" => self.levels = list(v).map(str::to_string).collect(),
            "repeats" => self.repeats = parse(key, v)?,
            "variants" => self.variants = list(v).map(str::parse).collect::<Result<_>>()?,
            "threads" => self.threads = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Apply every `key = value` line of `text`. Later lines win.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(
                    Some(i as u64 + 1),
                    format!("expected key = value, found {line:?}"),
                )
            })?;
            self.set(key.trim(), value).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Effective value of every key, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter()
            .map(|&k| (k, self.get(k).expect("known key")))
            .collect()
    }

    /// Text form of one key, accepted back by [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "case_column" => self.case_column.clone(),
            "activity_column" => self.activity_column.clone(),
            "timestamp_column" => self
                .timestamp_column
                .clone()
                .unwrap_or_else(|| "none".into()),
            "timestamp_format" => self.timestamp_format.clone(),
            "attributes" => self
                .attributes
                .iter()
                .map(|(c, n)| {
                    if c == n {
                        c.clone()
                    } else {
                        format!("{c}:{n}")
                    }
                })
                .collect::<Vec<_>>()
                .join(","),
            "k" => self.k.to_string(),
            "activity_embedding_dim" => self.activity_embedding_dim.to_string(),
            "attribute_embedding_dim" => self.attribute_embedding_dim.to_string(),
            "lstm_layer_sizes" => join(&self.lstm_layer_sizes),
            "dropout_rate" => self.dropout_rate.to_string(),
            "use_prefix" => self.use_prefix.to_string(),
            "use_suffix" => self.use_suffix.to_string(),
            "use_attributes" => self.use_attributes.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "early_stop_patience" => self.early_stop_patience.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "validation_fraction" => self.validation_fraction.to_string(),
            "seed" => self.seed.to_string(),
            "dataset" => self
                .dataset
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            "protocol" => match self.protocol {
                Protocol::FixedCountOnePerTrace => "fixed_count".into(),
                Protocol::Proportion => "proportion".into(),
            },
            "levels" => self.levels.join(","),
            "repeats" => self.repeats.to_string(),
            "variants" => self
                .variants
                .iter()
                .map(|v| v.name())
                .collect::<Vec<_>>()
                .join(","),
            "threads" => self.threads.to_string(),
            _ => return None,
        })
    }

    pub fn csv_format(&self) -> CsvFormat {
        CsvFormat {
            mapping: ColumnMapping {
                case: self.case_column.clone(),
                activity: self.activity_column.clone(),
                timestamp: self.timestamp_column.clone(),
                attributes: self.attributes.clone(),
            },
            timestamp_format: self.timestamp_format.clone(),
        }
    }

    /// Attribute names as they appear in parsed logs.
    pub fn attribute_names(&self) -> Vec<String> {
        self.attributes.iter().map(|(_, n)| n.clone()).collect()
    }

    pub fn architecture(&self) -> Result<ArchitectureConfig> {
        let arch = ArchitectureConfig {
            k: self.k,
            activity_embedding_dim: self.activity_embedding_dim,
            attributes: self
                .attribute_names()
                .into_iter()
                .map(|name| AttributeSpec {
                    name,
                    embedding_dim: self.attribute_embedding_dim,
                })
                .collect(),
            lstm_layer_sizes: self.lstm_layer_sizes.clone(),
            dropout_rate: self.dropout_rate,
            use_prefix: self.use_prefix,
            use_suffix: self.use_suffix,
            use_attributes: self.use_attributes,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let tc = TrainConfig {
            max_epochs: self.max_epochs,
            early_stop_patience: self.early_stop_patience,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
        };
        tc.validate()?;
        Ok(tc)
    }

    pub fn missing_levels(&self) -> Result<Vec<MissingLevel>> {
        self.levels
            .iter()
            .map(|l| match self.protocol {
                Protocol::FixedCountOnePerTrace => parse("levels", l).map(MissingLevel::FixedCount),
                Protocol::Proportion => {
                    let fraction = match l.strip_suffix('%') {
                        Some(pct) => parse::<f64>("levels", pct)? / 100.0,
                        None => parse("levels", l)?,
                    };
                    Ok(MissingLevel::Proportion(fraction))
                }
            })
            .collect()
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        let plan = ExperimentPlan {
            dataset: self
                .dataset
                .clone()
                .ok_or_else(|| Error::Config("an experiment needs a dataset".into()))?,
            levels: self.missing_levels()?,
            repeats: self.repeats,
            variants: self.variants.clone(),
            base_seed: self.seed,
            architecture: self.architecture()?,
            train: self.train_config()?,
        };
        plan.validate()?;
        Ok(plan)
    }
}
