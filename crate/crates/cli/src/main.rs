//! Command-line front end: corrupt, train, repair, evaluate, experiment.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Arg, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use logmend::config::{RunConfig, KEYS};
use logmend::corruption::{corrupt_fixed_count, corrupt_proportion, CorruptionLedger};
use logmend::dataset::{build_repair_set, build_training_set, build_vocabulary, write_samples_csv};
use logmend::evaluation::{compare_table, read_reference, run_experiment, score};
use logmend::eventlog::{parse_csv, parse_xes, serialize_csv, EventLog};
use logmend::repairnet::{repair, train, write_history_csv, Checkpoint};

/// Repair missing activity labels in event logs.
///
/// Every configuration key can be given as `--key value` (dashes or
/// underscores) or in a `key = value` file passed with `--config`; flags
/// win over the file.
#[derive(Parser)]
#[command(name = "logmend", version)]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Delete activity labels and record them in a ledger.
    Corrupt(CorruptArgs),
    /// Train a repair model on the labeled events of a log.
    Train(TrainArgs),
    /// Fill missing labels with a trained model.
    Repair(RepairArgs),
    /// Score a repaired log against the ledger.
    Evaluate(EvaluateArgs),
    /// Run repeated corrupt/train/repair/score cycles from a plan file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    input: PathBuf,
    /// Corrupted log (CSV).
    #[arg(long)]
    output: PathBuf,
    /// Ledger CSV; the JSON sidecar goes next to it with a `.json` extension.
    #[arg(long)]
    ledger: PathBuf,
    /// Delete this many labels, at most one per trace.
    #[arg(
        long,
        conflicts_with = "proportion",
        required_unless_present = "proportion"
    )]
    count: Option<usize>,
    /// Delete this fraction of all labels.
    #[arg(long)]
    proportion: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to the checkpoint path with a `.history.csv` extension.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Write the encoded training samples as CSV.
    #[arg(long, value_name = "FILE")]
    dump_samples: Option<PathBuf>,
}

#[derive(Args)]
struct RepairArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Write the encoded repair samples as CSV.
    #[arg(long, value_name = "FILE")]
    dump_samples: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    repaired: PathBuf,
    #[arg(long)]
    ledger: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Plan file; same format as `--config`.
    plan: Option<PathBuf>,
    /// Report CSV.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Add a wall_time_s column to the report CSV.
    #[arg(long)]
    timings: bool,
    /// CSV of expected means (dataset,missing_level,variant,expected_mean,tolerance).
    #[arg(long)]
    reference: Option<PathBuf>,
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

/// The clap command with one `--key` flag per configuration key.
fn command() -> clap::Command {
    let mut cmd = Cli::command();
    let defaults = RunConfig::default();
    for &key in KEYS {
        // clap wants 'static names; this runs once per process
        let long: &'static str = flag_name(key).leak();
        let mut arg = Arg::new(key)
            .long(long)
            .value_name("VALUE")
            .help(format!(
                "[default: {}]",
                defaults.get(key).unwrap_or_default()
            ))
            .global(true)
            .help_heading("Configuration");
        if key.contains('_') {
            arg = arg.alias(key);
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

fn resolve_config(file: Option<&Path>, matches: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = file {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text)
            .with_context(|| format!("in {}", path.display()))?;
    }
    let sub = matches.subcommand().map(|(_, m)| m);
    for &key in KEYS {
        let value = sub
            .and_then(|m| m.get_one::<String>(key))
            .or_else(|| matches.get_one::<String>(key));
        if let Some(v) = value {
            cfg.set(key, v)
                .with_context(|| format!("--{}", flag_name(key)))?;
        }
    }
    Ok(cfg)
}

fn echo_config(name: &str, cfg: &RunConfig, extra: &[(&str, String)]) {
    eprintln!("# logmend {name} {}", env!("CARGO_PKG_VERSION"));
    for (k, v) in cfg
        .entries()
        .iter()
        .map(|(k, v)| (*k, v.clone()))
        .chain(extra.iter().cloned())
    {
        eprintln!("# {k} = {v}");
    }
}

fn read_log(path: &Path, cfg: &RunConfig) -> Result<EventLog> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let reader = BufReader::new(file);
    let log = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("xes"))
    {
        parse_xes(reader)
    } else {
        parse_csv(reader, &cfg.csv_format())
    };
    log.with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_log(log: &EventLog, path: &Path, cfg: &RunConfig) -> Result<()> {
    let mut w = create(path)?;
    let mut format = cfg.csv_format();
    // keep the column names the log was read with, whatever its source
    format.mapping.attributes = log
        .attribute_names()
        .iter()
        .map(|n| (n.clone(), n.clone()))
        .collect();
    serialize_csv(log, &mut w, &format)?;
    w.flush()?;
    Ok(())
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(ext);
    PathBuf::from(p)
}

fn ledger_meta_path(ledger: &Path) -> PathBuf {
    ledger.with_extension("json")
}

fn corrupt(args: &CorruptArgs, cfg: &RunConfig) -> Result<()> {
    let protocol = match (args.count, args.proportion) {
        (Some(n), _) => format!("fixed_count {n}"),
        (_, Some(p)) => format!("proportion {p}"),
        _ => unreachable!("clap requires one"),
    };
    echo_config("corrupt", cfg, &[("corruption", protocol)]);
    let log = read_log(&args.input, cfg)?;
    let (corrupted, ledger) = match (args.count, args.proportion) {
        (Some(n), _) => corrupt_fixed_count(&log, n, cfg.seed)?,
        (_, Some(p)) => corrupt_proportion(&log, p, cfg.seed)?,
        _ => unreachable!(),
    };
    write_log(&corrupted, &args.output, cfg)?;
    let mut w = create(&args.ledger)?;
    ledger.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&ledger_meta_path(&args.ledger))?;
    ledger.write_meta(&mut w)?;
    w.flush()?;
    println!("removed {} labels", ledger.len());
    Ok(())
}

fn train_cmd(args: &TrainArgs, cfg: &RunConfig) -> Result<()> {
    let arch = cfg.architecture()?;
    let tc = cfg.train_config()?;
    echo_config("train", cfg, &[]);
    let log = read_log(&args.input, cfg)?;
    let attrs = arch.attribute_names();
    let vocab = build_vocabulary(&log, &attrs);
    let samples = build_training_set(&log, &vocab, arch.context(), &attrs);
    if let Some(path) = &args.dump_samples {
        let mut w = create(path)?;
        write_samples_csv(&samples, &vocab, &attrs, &mut w)?;
        w.flush()?;
    }
    let cp = train(&samples, &vocab, &arch, &tc)?;
    cp.save(&args.checkpoint)
        .with_context(|| format!("writing {}", args.checkpoint.display()))?;
    let history = args
        .history
        .clone()
        .unwrap_or_else(|| with_extension(&args.checkpoint.with_extension(""), ".history.csv"));
    let mut w = create(&history)?;
    write_history_csv(&cp.history, &mut w)?;
    w.flush()?;
    let best = cp.best_record().context("no epochs recorded")?;
    println!(
        "best epoch {} of {}: val_loss {:.6} val_accuracy {:.4}",
        best.epoch,
        cp.history.len(),
        best.val_loss,
        best.val_accuracy
    );
    Ok(())
}

fn repair_cmd(args: &RepairArgs, cfg: &RunConfig) -> Result<()> {
    echo_config("repair", cfg, &[]);
    let cp = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let log = read_log(&args.input, cfg)?;
    let attrs = cp.architecture.attribute_names();
    for a in &attrs {
        if !log.attribute_names().contains(a) {
            bail!(
                "the model uses attribute {a:?}, which {} lacks",
                args.input.display()
            );
        }
    }
    if let Some(path) = &args.dump_samples {
        let samples = build_repair_set(&log, &cp.vocab, cp.architecture.context(), &attrs);
        let mut w = create(path)?;
        write_samples_csv(&samples, &cp.vocab, &attrs, &mut w)?;
        w.flush()?;
    }
    let repaired = repair(&log, &cp, cp.architecture.context())?;
    write_log(&repaired, &args.output, cfg)?;
    println!("filled {} labels", log.num_missing());
    Ok(())
}

fn evaluate(args: &EvaluateArgs, cfg: &RunConfig) -> Result<()> {
    echo_config("evaluate", cfg, &[]);
    let original = read_log(&args.original, cfg)?;
    let repaired = read_log(&args.repaired, cfg)?;
    let meta = ledger_meta_path(&args.ledger);
    let ledger = CorruptionLedger::read(
        BufReader::new(
            File::open(&args.ledger)
                .with_context(|| format!("opening {}", args.ledger.display()))?,
        ),
        BufReader::new(File::open(&meta).with_context(|| format!("opening {}", meta.display()))?),
    )?;
    let report = score(&original, &repaired, &ledger)?;
    println!("{report}");
    Ok(())
}

/// Returns whether every cell succeeded and matched the reference.
fn experiment(args: &ExperimentArgs, cfg: &RunConfig) -> Result<bool> {
    let plan = cfg.plan()?;
    echo_config("experiment", cfg, &[]);
    let log = read_log(&plan.dataset, cfg)?;
    let report = run_experiment(&plan, &log, cfg.threads)?;
    match &args.output {
        Some(path) => {
            let mut w = create(path)?;
            report.write_csv(&mut w, args.timings)?;
            w.flush()?;
        }
        None => report.write_csv(io::stdout().lock(), args.timings)?,
    }
    report.write_text(io::stderr().lock())?;
    let mut ok = report.failures() == 0;
    if let Some(path) = &args.reference {
        let cells = read_reference(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        )?;
        for c in compare_table(&report, &cells) {
            let r = &c.reference;
            eprintln!(
                "{} {} {} {}: expected {} ± {}, got {}",
                if c.passed { "ok  " } else { "FAIL" },
                r.dataset,
                r.missing_level,
                r.variant,
                r.expected_mean,
                r.tolerance,
                c.actual
                    .map_or("nothing".to_string(), |a| format!("{a:.4}"))
            );
            ok &= c.passed;
        }
    }
    Ok(ok)
}

fn run() -> Result<bool> {
    let matches = command().get_matches();
    let cli = Cli::from_arg_matches(&matches)?;
    let config_file = match &cli.command {
        Command::Experiment(ExperimentArgs { plan: Some(p), .. }) => {
            if cli.config.is_some() {
                bail!("give either a plan file or --config, not both");
            }
            Some(p.clone())
        }
        _ => cli.config.clone(),
    };
    let cfg = resolve_config(config_file.as_deref(), &matches)?;
    match &cli.command {
        Command::Corrupt(a) => corrupt(a, &cfg)?,
        Command::Train(a) => train_cmd(a, &cfg)?,
        Command::Repair(a) => repair_cmd(a, &cfg)?,
        Command::Evaluate(a) => evaluate(a, &cfg)?,
        Command::Experiment(a) => return experiment(a, &cfg),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
