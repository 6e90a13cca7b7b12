//! Scoring repairs against a ledger and running repeated experiments.

use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corruption::{corrupt_fixed_count, corrupt_proportion, CorruptionLedger, LedgerEntry};
use crate::dataset::{build_training_set, build_vocabulary};
use crate::error::{Error, Result};
use crate::eventlog::{Event, EventLog};
use crate::repairnet::{repair, train, ArchitectureConfig, TrainConfig, Variant};
use crate::rng;

/// Success rate of one or more repairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    /// Missing labels, summed over repeats.
    pub n: usize,
    /// Correctly repaired labels, summed over repeats.
    pub m: usize,
    /// `m / n`.
    pub success_rate: f64,
    pub per_repeat_rates: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of `per_repeat_rates`; 0 for one repeat.
    pub std_dev: f64,
}

impl SuccessReport {
    fn single(n: usize, m: usize) -> Self {
        let rate = if n == 0 { 0.0 } else { m as f64 / n as f64 };
        SuccessReport {
            n,
            m,
            success_rate: rate,
            per_repeat_rates: vec![rate],
            mean: rate,
            std_dev: 0.0,
        }
    }

    /// Pool several repeats.
    pub fn combine(repeats: &[SuccessReport]) -> Self {
        let n = repeats.iter().map(|r| r.n).sum();
        let m = repeats.iter().map(|r| r.m).sum();
        let rates: Vec<f64> = repeats
            .iter()
            .flat_map(|r| r.per_repeat_rates.iter().copied())
            .collect();
        let (mean, std_dev) = mean_and_std(&rates);
        SuccessReport {
            n,
            m,
            success_rate: if n == 0 { 0.0 } else { m as f64 / n as f64 },
            per_repeat_rates: rates,
            mean,
            std_dev,
        }
    }
}

impl fmt::Display for SuccessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} repaired correctly, success rate {:.4}",
            self.m, self.n, self.success_rate
        )?;
        if self.per_repeat_rates.len() > 1 {
            write!(
                f,
                " (mean {:.4} ± {:.4} over {} repeats)",
                self.mean,
                self.std_dev,
                self.per_repeat_rates.len()
            )?;
        }
        Ok(())
    }
}

/// Mean and sample standard deviation; the deviation is 0 below two values.
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Compare repaired labels with the ledger's originals by exact string
/// equality.
pub fn score(
    original: &EventLog,
    repaired: &EventLog,
    ledger: &CorruptionLedger,
) -> Result<SuccessReport> {
    let mut m = 0;
    for e in &ledger.entries {
        fn at<'a>(log: &'a EventLog, e: &LedgerEntry, which: &str) -> Result<&'a Event> {
            log.event(&e.trace_id, e.position).ok_or_else(|| {
                Error::Consistency(format!(
                    "{which} log has no event {}:{}",
                    e.trace_id, e.position
                ))
            })
        }
        let orig = at(original, e, "original")?;
        if orig.activity() != Some(e.original_activity.as_str()) {
            return Err(Error::Consistency(format!(
                "ledger says {}:{} was {:?}, original log has {:?}",
                e.trace_id,
                e.position,
                e.original_activity,
                orig.activity()
            )));
        }
        let fixed = at(repaired, e, "repaired")?.activity().ok_or_else(|| {
            Error::Consistency(format!(
                "event {}:{} was not repaired",
                e.trace_id, e.position
            ))
        })?;
        if fixed == e.original_activity {
            m += 1;
        }
    }
    Ok(SuccessReport::single(ledger.len(), m))
}

/// Baseline that fills each missing label with a uniform draw from
/// `labels`.
pub fn repair_uniform(log: &EventLog, labels: &[String], seed: u64) -> Result<EventLog> {
    if labels.is_empty() {
        return Err(Error::Argument("no labels to draw from".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut out = log.clone();
    let missing: Vec<(String, usize)> = log
        .events()
        .filter(|e| e.is_missing())
        .map(|e| (e.trace_id().to_string(), e.position()))
        .collect();
    for (trace, pos) in missing {
        let label = labels[rng.random_range(0..labels.len())].clone();
        out.set_activity(&trace, pos, Some(label))?;
    }
    Ok(out)
}

/// How many labels an experiment cell removes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingLevel {
    /// That many labels, at most one per trace.
    FixedCount(usize),
    /// That fraction of all labels.
    Proportion(f64),
}

impl MissingLevel {
    pub fn corrupt(self, log: &EventLog, seed: u64) -> Result<(EventLog, CorruptionLedger)> {
        match self {
            MissingLevel::FixedCount(n) => corrupt_fixed_count(log, n, seed),
            MissingLevel::Proportion(p) => corrupt_proportion(log, p, seed),
        }
    }
}

impl fmt::Display for MissingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MissingLevel::FixedCount(n) => write!(f, "{n}"),
            // rounded so that 0.3 prints as 30%, not 30.000000000000004%
            MissingLevel::Proportion(p) => write!(f, "{}%", (p * 100.0 * 1e6).round() / 1e6),
        }
    }
}

/// One corrupt, train, repair and score cycle. `seed` drives both the
/// corruption and the training.
pub fn run_once(
    log: &EventLog,
    level: MissingLevel,
    arch: &ArchitectureConfig,
    tc: &TrainConfig,
    seed: u64,
) -> Result<SuccessReport> {
    let (corrupted, ledger) = level.corrupt(log, seed)?;
    let attrs = arch.attribute_names();
    let vocab = build_vocabulary(&corrupted, &attrs);
    let samples = build_training_set(&corrupted, &vocab, arch.context(), &attrs);
    let tc = TrainConfig { seed, ..tc.clone() };
    let cp = train(&samples, &vocab, arch, &tc)?;
    let repaired = repair(&corrupted, &cp, arch.context())?;
    score(log, &repaired, &ledger)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: PathBuf,
    pub levels: Vec<MissingLevel>,
    pub repeats: usize,
    pub variants: Vec<Variant>,
    pub base_seed: u64,
    pub architecture: ArchitectureConfig,
    pub train: TrainConfig,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.levels.is_empty() || self.variants.is_empty() {
            return Err(Error::Config(
                "an experiment needs at least one level and one variant".into(),
            ));
        }
        self.architecture.validate()?;
        self.train.validate()
    }

    /// Name used in the report's dataset column.
    pub fn dataset_name(&self) -> String {
        self.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dataset.display().to_string())
    }
}

/// One (level, variant) cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub level: MissingLevel,
    pub variant: Variant,
    pub outcome: std::result::Result<SuccessReport, String>,
    pub wall_time: Duration,
}

impl ReportRow {
    /// Missing labels per repeat.
    pub fn n_per_repeat(&self) -> Option<usize> {
        self.outcome
            .as_ref()
            .ok()
            .map(|r| r.n / r.per_repeat_rates.len().max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn row(&self, level: &str, variant: Variant) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.level.to_string() == level)
    }

    /// Columns `dataset,missing_level,variant,mean,std,n,error`, plus
    /// `wall_time_s` when `timings` is set. Without timings the output is a
    /// pure function of the plan.
    pub fn write_csv<W: Write>(&self, sink: W, timings: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec![
            "dataset",
            "missing_level",
            "variant",
            "mean",
            "std",
            "n",
            "error",
        ];
        if timings {
            header.push("wall_time_s");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let (mean, std, n, err) = match &r.outcome {
                Ok(s) => (
                    format!("{:.6}", s.mean),
                    format!("{:.6}", s.std_dev),
                    r.n_per_repeat().unwrap_or(0).to_string(),
                    String::new(),
                ),
                Err(e) => (String::new(), String::new(), String::new(), e.clone()),
            };
            let mut rec = vec![
                r.dataset.clone(),
                r.level.to_string(),
                r.variant.name().to_string(),
                mean,
                std,
                n,
                err,
            ];
            if timings {
                rec.push(format!("{:.3}", r.wall_time.as_secs_f64()));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned text table including wall time.
    pub fn write_text<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(
            sink,
            "{:<16} {:>8} {:<14} {:>8} {:>8} {:>7} {:>10}",
            "dataset", "missing", "variant", "mean", "std", "n", "wall-time"
        )?;
        for r in &self.rows {
            match &r.outcome {
                Ok(s) => writeln!(
                    sink,
                    "{:<16} {:>8} {:<14} {:>8.4} {:>8.4} {:>7} {:>9.1}s",
                    r.dataset,
                    r.level.to_string(),
                    r.variant.name(),
                    s.mean,
                    s.std_dev,
                    r.n_per_repeat().unwrap_or(0),
                    r.wall_time.as_secs_f64()
                )?,
                Err(e) => writeln!(
                    sink,
                    "{:<16} {:>8} {:<14} error: {e}",
                    r.dataset,
                    r.level.to_string(),
                    r.variant.name()
                )?,
            }
        }
        Ok(())
    }
}

/// Run every (level, variant) cell of `plan` on `log`. Repeat `r` uses seed
/// `base_seed + r`, so all variants see the same corrupted logs. With
/// `threads > 1` the repeats of a cell run concurrently; results are
/// gathered in repeat order, so the report does not depend on `threads`.
pub fn run_experiment(
    plan: &ExperimentPlan,
    log: &EventLog,
    threads: usize,
) -> Result<ExperimentReport> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let dataset = plan.dataset_name();
    let mut report = ExperimentReport::default();
    for &level in &plan.levels {
        for &variant in &plan.variants {
            let arch = variant.apply(&plan.architecture);
            let started = Instant::now();
            let seeds: Vec<u64> = (0..plan.repeats as u64)
                .map(|r| plan.base_seed.wrapping_add(r))
                .collect();
            let results: Vec<Result<SuccessReport>> = if threads > 1 {
                use rayon::prelude::*;
                pool.install(|| {
                    seeds
                        .par_iter()
                        .map(|&s| run_once(log, level, &arch, &plan.train, s))
                        .collect()
                })
            } else {
                seeds
                    .iter()
                    .map(|&s| run_once(log, level, &arch, &plan.train, s))
                    .collect()
            };
            let outcome = results
                .into_iter()
                .collect::<Result<Vec<_>>>()
                .map(|rs| SuccessReport::combine(&rs))
                .map_err(|e| e.to_string());
            match &outcome {
                Ok(s) => log::info!("{dataset} {level} {}: {s}", variant.name()),
                Err(e) => log::warn!("{dataset} {level} {}: {e}", variant.name()),
            }
            report.rows.push(ReportRow {
                dataset: dataset.clone(),
                level,
                variant,
                outcome,
                wall_time: started.elapsed(),
            });
        }
    }
    Ok(report)
}

/// Expected mean for one report cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCell {
    pub dataset: String,
    pub missing_level: String,
    pub variant: String,
    pub expected_mean: f64,
    pub tolerance: f64,
}

/// Read reference cells from CSV with header
/// `dataset,missing_level,variant,expected_mean,tolerance`.
pub fn read_reference<R: Read>(source: R) -> Result<Vec<ReferenceCell>> {
    let mut r = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellComparison {
    pub reference: ReferenceCell,
    /// `None` when the report has no such cell or the cell failed.
    pub actual: Option<f64>,
    pub passed: bool,
}

/// Check each reference cell against the report.
pub fn compare_table(
    report: &ExperimentReport,
    reference: &[ReferenceCell],
) -> Vec<CellComparison> {
    reference
        .iter()
        .map(|c| {
            let actual = report
                .rows
                .iter()
                .find(|r| {
                    r.dataset == c.dataset
                        && r.level.to_string() == c.missing_level
                        && r.variant.name() == c.variant
                })
                .and_then(|r| r.outcome.as_ref().ok())
                .map(|s| s.mean);
            CellComparison {
                reference: c.clone(),
                actual,
                passed: actual.is_some_and(|a| (a - c.expected_mean).abs() <= c.tolerance),
            }
        })
        .collect()
}
