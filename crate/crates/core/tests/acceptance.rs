//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The extended criteria on public logs run only when the environment
//! variables `LOGMEND_HELPDESK` / `LOGMEND_PRODUCTION` point at the log
//! files (XES, or CSV with a `<file>.conf` run configuration next to it).

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use logmend::config::RunConfig;
use logmend::corruption::{corrupt_fixed_count, corrupt_proportion, restore};
use logmend::dataset::{build_training_set, build_vocabulary};
use logmend::evaluation::{repair_uniform, run_experiment, score, ExperimentPlan, MissingLevel};
use logmend::eventlog::{parse_csv, parse_xes, serialize_csv, CsvFormat, EventLog};
use logmend::repairnet::{
    repair, train, write_history_csv, ArchitectureConfig, TrainConfig, Variant,
};
use logmend::synthetic::{airport_log, suffix_determined_log};

const GRADIENT_TOLERANCE: f64 = 1e-4;
const GRADIENT_BUDGET: Duration = Duration::from_secs(60);
const ORACLE_DRAWS: u64 = 50;
const ORACLE_TOLERANCE: f64 = 1e-6;
const SYNTHETIC_TRACES: usize = 2000;
const SYNTHETIC_BLOCKS: usize = 2;
const SYNTHETIC_FRACTION: f64 = 0.2;
const SYNTHETIC_REPEATS: usize = 5;
const SYNTHETIC_FULL_MIN: f64 = 0.95;
const SYNTHETIC_MIN_GAP: f64 = 0.10;
const SYNTHETIC_BUDGET: Duration = Duration::from_secs(600);
const AIRPORT_TRACES: usize = 500;
const AIRPORT_MISSING: usize = 50;
const AIRPORT_REPEATS: usize = 3;
const AIRPORT_MIN: f64 = 0.90;
const AIRPORT_BUDGET: Duration = Duration::from_secs(300);
const RANDOM_REPEATS: u64 = 10;
const RANDOM_SIGMAS: f64 = 3.0;
const EXTENDED_REPEATS: usize = 10;
const EXTENDED_TOLERANCE: f64 = 0.05;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn gradients() -> Verdict {
    let started = Instant::now();
    let checks = common::gradients::all();
    let elapsed = started.elapsed();
    let (worst_name, worst) = checks
        .iter()
        .map(|(n, r)| (n.as_str(), r.max_rel_error()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("checks");
    let finite = checks.iter().all(|(_, r)| r.finite);
    verdict(
        finite && worst < GRADIENT_TOLERANCE && elapsed < GRADIENT_BUDGET,
        format!(
            "{} checks, max relative error {worst:.2e} ({worst_name}) < {GRADIENT_TOLERANCE:e}, {:.1}s",
            checks.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn forward_oracle() -> Verdict {
    let err = common::oracle::max_error(ORACLE_DRAWS);
    verdict(
        err < ORACLE_TOLERANCE,
        format!("{ORACLE_DRAWS} draws, max deviation {err:.2e} < {ORACLE_TOLERANCE:e}"),
    )
}

/// Ledger, history and repaired log bytes of one seeded pipeline run.
fn pipeline_bytes(log: &EventLog, seed: u64) -> [Vec<u8>; 4] {
    let arch = ArchitectureConfig {
        lstm_layer_sizes: vec![16, 8],
        activity_embedding_dim: 16,
        ..ArchitectureConfig::default()
    };
    let tc = TrainConfig {
        max_epochs: 4,
        seed,
        ..TrainConfig::default()
    };
    let (corrupted, ledger) = corrupt_proportion(log, 0.2, seed).unwrap();
    let vocab = build_vocabulary(&corrupted, &["resource"]);
    let samples = build_training_set(&corrupted, &vocab, arch.context(), &["resource"]);
    let cp = train(&samples, &vocab, &arch, &tc).unwrap();
    let repaired = repair(&corrupted, &cp, arch.context()).unwrap();
    let (mut l, mut m, mut h, mut r) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    ledger.write_csv(&mut l).unwrap();
    ledger.write_meta(&mut m).unwrap();
    write_history_csv(&cp.history, &mut h).unwrap();
    serialize_csv(&repaired, &mut r, &CsvFormat::default()).unwrap();
    [l, m, h, r]
}

fn determinism() -> Verdict {
    let log = airport_log(120, 9);
    let a = pipeline_bytes(&log, 11);
    let b = pipeline_bytes(&log, 11);
    let c = pipeline_bytes(&log, 12);
    let names = ["ledger csv", "ledger meta", "history", "repaired log"];
    let differing: Vec<&str> = names
        .iter()
        .zip(a.iter().zip(&b))
        .filter(|(_, (x, y))| x != y)
        .map(|(n, _)| *n)
        .collect();
    verdict(
        differing.is_empty() && a[0] != c[0],
        if differing.is_empty() {
            "ledgers, histories and repaired logs byte-identical across runs".to_string()
        } else {
            format!("differs: {}", differing.join(", "))
        },
    )
}

fn plan(name: &str, level: MissingLevel, repeats: usize, variants: Vec<Variant>) -> ExperimentPlan {
    ExperimentPlan {
        dataset: name.into(),
        levels: vec![level],
        repeats,
        variants,
        base_seed: 0,
        architecture: ArchitectureConfig::default(),
        train: TrainConfig::default(),
    }
}

fn synthetic() -> Verdict {
    let started = Instant::now();
    let log = suffix_determined_log(SYNTHETIC_TRACES, SYNTHETIC_BLOCKS, 2024);
    let p = plan(
        "suffix_determined",
        MissingLevel::Proportion(SYNTHETIC_FRACTION),
        SYNTHETIC_REPEATS,
        vec![Variant::Full, Variant::PrefixOnly],
    );
    let report = run_experiment(&p, &log, 1).unwrap();
    let elapsed = started.elapsed();
    let mean = |v| {
        report
            .rows
            .iter()
            .find(|r| r.variant == v)
            .and_then(|r| r.outcome.as_ref().ok())
            .map(|s| (s.mean, s.std_dev))
    };
    let (Some(full), Some(prefix)) = (mean(Variant::Full), mean(Variant::PrefixOnly)) else {
        return verdict(false, format!("experiment failed: {:?}", report.rows));
    };
    verdict(
        full.0 >= SYNTHETIC_FULL_MIN && full.0 - prefix.0 >= SYNTHETIC_MIN_GAP && elapsed < SYNTHETIC_BUDGET,
        format!(
            "full {:.4} ± {:.4} (≥ {SYNTHETIC_FULL_MIN}), prefix-only {:.4} ± {:.4} (gap {:.4} ≥ {SYNTHETIC_MIN_GAP}), {:.0}s",
            full.0,
            full.1,
            prefix.0,
            prefix.1,
            full.0 - prefix.0,
            elapsed.as_secs_f64()
        ),
    )
}

fn airport() -> Verdict {
    let started = Instant::now();
    let log = airport_log(AIRPORT_TRACES, 7);
    let p = plan(
        "airport",
        MissingLevel::FixedCount(AIRPORT_MISSING),
        AIRPORT_REPEATS,
        vec![Variant::Full],
    );
    let report = run_experiment(&p, &log, 1).unwrap();
    let elapsed = started.elapsed();
    match &report.rows[0].outcome {
        Ok(s) => verdict(
            s.mean >= AIRPORT_MIN && elapsed < AIRPORT_BUDGET,
            format!(
                "mean {:.4} ± {:.4} over {} repeats (≥ {AIRPORT_MIN}), {:.0}s",
                s.mean,
                s.std_dev,
                s.per_repeat_rates.len(),
                elapsed.as_secs_f64()
            ),
        ),
        Err(e) => verdict(false, e.clone()),
    }
}

fn scoring() -> Verdict {
    let log = airport_log(40, 3);
    // exactness: 3 of 4
    let (corrupted, ledger) = corrupt_fixed_count(&log, 4, 3).unwrap();
    let mut repaired = restore(&corrupted, &ledger).unwrap();
    let e = &ledger.entries[0];
    let wrong = if e.original_activity == "Take off" {
        "Check in"
    } else {
        "Take off"
    };
    repaired
        .set_activity(&e.trace_id, e.position, Some(wrong.into()))
        .unwrap();
    let partial = score(&log, &repaired, &ledger).unwrap();
    let exact = partial.m == 3 && partial.n == 4 && partial.success_rate == 0.75;

    let restored = score(&log, &restore(&corrupted, &ledger).unwrap(), &ledger).unwrap();
    let oracle = restored.success_rate == 1.0;

    let balanced = suffix_determined_log(500, 2, 3);
    let mut rates = Vec::new();
    let mut n = 0;
    let mut labels = 0;
    for r in 0..RANDOM_REPEATS {
        let (c, l) = corrupt_proportion(&balanced, 0.2, r).unwrap();
        let vocab = build_vocabulary(&c, &["resource"]);
        labels = vocab.activities.values().len();
        let s = score(
            &balanced,
            &repair_uniform(&c, vocab.activities.values(), 100 + r).unwrap(),
            &l,
        )
        .unwrap();
        n = s.n;
        rates.push(s.success_rate);
    }
    let p = 1.0 / labels as f64;
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let band = RANDOM_SIGMAS * (p * (1.0 - p) / (n as f64 * rates.len() as f64)).sqrt();
    let random_ok = (mean - p).abs() <= band;
    verdict(
        exact && oracle && random_ok,
        format!(
            "m/n {}/{} = {}, restore {}, random {mean:.4} vs 1/{labels} = {p:.4} ± {band:.4}",
            partial.m, partial.n, partial.success_rate, restored.success_rate
        ),
    )
}

fn load_public(path: &Path) -> (EventLog, RunConfig) {
    let conf = path.with_extension(format!(
        "{}.conf",
        path.extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_default()
    ));
    let cfg = match std::fs::read_to_string(&conf) {
        Ok(text) => RunConfig::from_text(&text).unwrap(),
        Err(_) => RunConfig::default(),
    };
    let file = std::fs::File::open(path).unwrap();
    let log = if path.extension().is_some_and(|e| e == "xes") {
        parse_xes(std::io::BufReader::new(file)).unwrap()
    } else {
        parse_csv(file, &cfg.csv_format()).unwrap()
    };
    (log, cfg)
}

fn extended(var: &str, fraction: f64, expected: f64) -> Option<Verdict> {
    let path = std::env::var_os(var)?;
    let (log, cfg) = load_public(Path::new(&path));
    let mut p = plan(
        var,
        MissingLevel::Proportion(fraction),
        EXTENDED_REPEATS,
        vec![Variant::Full],
    );
    p.architecture = cfg.architecture().unwrap();
    let report = run_experiment(&p, &log, cfg.threads).unwrap();
    Some(match &report.rows[0].outcome {
        Ok(s) => verdict(
            (s.mean - expected).abs() <= EXTENDED_TOLERANCE,
            format!(
                "mean {:.4} ± {:.4}, expected {expected} ± {EXTENDED_TOLERANCE}",
                s.mean, s.std_dev
            ),
        ),
        Err(e) => verdict(false, e.clone()),
    })
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("gradient check suite", gradients),
        ("forward oracle", forward_oracle),
        ("determinism", determinism),
        ("scoring", scoring),
        ("airport fixture", airport),
        ("synthetic suffix-determined log", synthetic),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let v = run();
        println!(
            "{} {name}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.passed);
    }
    for (name, var, fraction, expected) in [
        ("extended helpdesk 10%", "LOGMEND_HELPDESK", 0.1, 0.943),
        ("extended production 30%", "LOGMEND_PRODUCTION", 0.3, 0.936),
    ] {
        match extended(var, fraction, expected) {
            Some(v) => {
                println!(
                    "{} {name}: {}",
                    if v.passed { "PASS" } else { "FAIL" },
                    v.detail
                );
                failed += usize::from(!v.passed);
            }
            None => println!("SKIP {name}: set {var} to the log file to run"),
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
