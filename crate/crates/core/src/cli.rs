//! Pipeline commands behind the `basketflow` binary.
//!
//! Each command writes into one output directory, plus a
//! `<command>.manifest.json` there recording the config hash, master seed and
//! crate version. Nothing outside that directory is touched.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::arm::{mine_rules, write_rules_jsonl, AssociationRule, HashEnsemble, MiningOptions};
use crate::config::{QueryWindows, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{
    report_json, run_protocol, select_query_windows, user_repetition_test, write_ranks_csv,
    ProtocolConfig, RepetitionResult,
};
use crate::ingest::{parse_transactions, summarize, window_stream, write_canonical, DatasetSummary, TransactionRecordFormat};
use crate::model::{Basket, Window};
use crate::ome::{OnlineTrainer, TrainReport};
use crate::seeds;
use crate::snapshot::{read_snapshot, write_snapshot, MAGIC};
use crate::stats::CooccurrenceIndex;

pub const SNAPSHOT_FILE: &str = "embeddings.emb";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const RULES_FILE: &str = "rules.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const RANKS_FILE: &str = "ranks.csv";
pub const REPETITION_FILE: &str = "repetition.json";

/// A failed command with its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, config or missing inputs: exit 2.
    Usage(Error),
    /// Exit 1.
    Runtime(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error().fmt(f)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => Failure::Usage(e),
            other => Failure::Runtime(other),
        }
    }
}

pub type CmdResult<T> = std::result::Result<T, Failure>;

fn open_input(path: &Path) -> CmdResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Usage(Error::io(path, e)))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Writes `<command>.manifest.json` into `dir`. The content is a pure function
/// of its arguments so reruns are byte-identical.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    config: Option<&RunConfig>,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<PathBuf> {
    let path = dir.join(format!("{command}.manifest.json"));
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "snapshot_format": MAGIC,
        "config_sha256": config.map(RunConfig::hash),
        "seed": config.map(|c| c.hp.seed),
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "outputs": outputs.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
    });
    write_json(&path, &manifest)?;
    Ok(path)
}

fn read_baskets(path: &Path, format: &TransactionRecordFormat) -> CmdResult<Vec<Basket>> {
    let parsed = parse_transactions(open_input(path)?, format)?;
    for skipped in &parsed.skipped {
        log::warn!("{}: line {}: {}", path.display(), skipped.line, skipped.message);
    }
    Ok(parsed.baskets)
}

fn dataset(config: &RunConfig) -> CmdResult<(&Path, Vec<Basket>)> {
    let path = config.dataset.as_deref().ok_or_else(|| {
        Failure::Usage(Error::Config(vec!["`dataset` is required for this command".into()]))
    })?;
    Ok((path, read_baskets(path, &config.record_format())?))
}

fn windows(config: &RunConfig, baskets: &[Basket]) -> CmdResult<Vec<Window>> {
    Ok(window_stream(baskets, config.window_days)?)
}

/// Table of dataset counts.
pub fn format_summary(s: &DatasetSummary) -> String {
    format!(
        "{:<14}{:>10}\n{:<14}{:>10}\n{:<14}{:>10}\n{:<14}{:>10}\n{:<14}{:>10}\n",
        "users", s.users, "products", s.products, "baskets", s.baskets,
        "transactions", s.transactions, "days", s.days,
    )
}

/// Parses `input` in the named format and writes the canonical CSV to `out`.
pub fn cmd_ingest(input: &Path, format: &str, out: &Path) -> CmdResult<DatasetSummary> {
    let fmt = TransactionRecordFormat::by_name(format).ok_or_else(|| {
        Failure::Usage(Error::InvalidArgument(format!(
            "unknown format `{format}` (canonical, cj)"
        )))
    })?;
    let baskets = read_baskets(input, &fmt)?;
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    prepare_dir(dir)?;
    let w = create(out)?;
    write_canonical(&baskets, w)?;
    let summary = summarize(&baskets);
    write_manifest(dir, "ingest", None, &[input], &[out])?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub snapshot: PathBuf,
    pub reports: Vec<TrainReport>,
}

/// Trains on every window of the dataset and saves the snapshot.
pub fn cmd_train(config: &RunConfig) -> CmdResult<TrainOutcome> {
    let (input, baskets) = dataset(config)?;
    let windows = windows(config, &baskets)?;
    let dir = &config.output_dir;
    prepare_dir(dir)?;

    let mut trainer = OnlineTrainer::new(config.hp.clone());
    let mut store = trainer.new_store();
    let log_path = dir.join(TRAIN_LOG_FILE);
    let mut log = create(&log_path)?;
    let mut reports = Vec::with_capacity(windows.len());
    for w in &windows {
        let r = trainer.train_window(w, &mut store);
        log::info!(
            "window {}: {} baskets, {} tasks, mean loss {:.4}",
            r.window, r.baskets, r.tasks, r.mean_loss
        );
        serde_json::to_writer(&mut log, &r).map_err(Error::from)?;
        writeln!(log).map_err(|e| Error::io(&log_path, e))?;
        reports.push(r);
    }
    finish(log, &log_path)?;

    let snapshot = dir.join(SNAPSHOT_FILE);
    let w = create(&snapshot)?;
    write_snapshot(&store, w)?;
    write_manifest(dir, "train", Some(config), &[input], &[&snapshot, &log_path])?;
    Ok(TrainOutcome { snapshot, reports })
}

/// Mines rules from a snapshot. Lift is attached when the config names a
/// dataset.
pub fn cmd_mine(snapshot: &Path, config: &RunConfig) -> CmdResult<Vec<AssociationRule>> {
    let store = read_snapshot(open_input(snapshot)?)?;
    let index = match &config.dataset {
        Some(_) => Some(CooccurrenceIndex::build(&dataset(config)?.1)),
        None => None,
    };
    let ensemble = HashEnsemble::new(
        store.dim(),
        config.hash_functions,
        config.hash_tables,
        seeds::sub_seed(config.hp.seed, seeds::ENSEMBLE),
    )?;
    let opts = MiningOptions {
        top_k: config.top_k,
        guard: config.bucket_guard.guard(),
        min_occurrences: config.min_occurrences,
    };
    let out = mine_rules(&store, &ensemble, &opts, index.as_ref())?;
    if out.skipped_buckets > 0 {
        log::info!("{} oversized buckets skipped", out.skipped_buckets);
    }
    let dir = &config.output_dir;
    prepare_dir(dir)?;
    let path = dir.join(RULES_FILE);
    let w = create(&path)?;
    write_rules_jsonl(&out.rules, w)?;
    let mut inputs = vec![snapshot];
    inputs.extend(config.dataset.as_deref());
    write_manifest(dir, "mine", Some(config), &inputs, &[&path])?;
    Ok(out.rules)
}

/// Runs the retrieval protocol and writes the report (and per-query ranks
/// when `ranks` is set).
pub fn cmd_eval(config: &RunConfig, ranks: bool) -> CmdResult<serde_json::Value> {
    let (input, baskets) = dataset(config)?;
    let windows = windows(config, &baskets)?;
    let query_windows = match &config.query_windows {
        QueryWindows::Auto(n) => select_query_windows(
            windows.len(),
            *n,
            &mut seeds::rng(config.hp.seed, seeds::QUERY_WINDOWS),
        ),
        QueryWindows::List(l) => l.clone(),
    };
    let proto = ProtocolConfig {
        negatives: config.eval_negatives,
        ks: config.ks.clone(),
        scorers: config.scorers.clone(),
        targets: config.targets,
        ..ProtocolConfig::new(config.hp.clone())
    };
    let out = run_protocol(&windows, &query_windows, &proto).map_err(|e| match e {
        Error::QueryWindowOutOfRange { .. } => Failure::Usage(e),
        other => other.into(),
    })?;
    let report = report_json(&out.reports);

    let dir = &config.output_dir;
    prepare_dir(dir)?;
    let path = dir.join(REPORT_FILE);
    write_json(&path, &report)?;
    let mut outputs = vec![path];
    if ranks {
        let p = dir.join(RANKS_FILE);
        let w = create(&p)?;
        write_ranks_csv(&out.ranks, w)?;
        outputs.push(p);
    }
    let outputs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest(dir, "eval", Some(config), &[input], &outputs)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
struct RepetitionReport<'a> {
    #[serde(flatten)]
    result: &'a RepetitionResult,
    users: usize,
    baskets: usize,
}

/// User repeat-purchase test on a canonical CSV with `pairs` sampled pairs
/// per group.
pub fn cmd_analyze(input: &Path, pairs: usize, config: &RunConfig) -> CmdResult<RepetitionResult> {
    let baskets = read_baskets(input, &TransactionRecordFormat::canonical())?;
    let mut rng = seeds::rng(config.hp.seed, seeds::EVAL);
    let result = user_repetition_test(&baskets, pairs, &mut rng)?;
    let dir = &config.output_dir;
    prepare_dir(dir)?;
    let path = dir.join(REPETITION_FILE);
    let summary = summarize(&baskets);
    let report = RepetitionReport {
        result: &result,
        users: summary.users,
        baskets: summary.baskets,
    };
    write_json(&path, &serde_json::to_value(report).map_err(Error::from)?)?;
    write_manifest(dir, "analyze", Some(config), &[input], &[&path])?;
    Ok(result)
}
