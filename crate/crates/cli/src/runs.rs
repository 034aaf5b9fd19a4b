//! One training run on disk: checkpoints, training log, examples-seen
//! schedule and, when pairs are given, per-checkpoint accuracies.
//!
//! Layout of a run directory:
//!
//! ```text
//! checkpoints/step-XXXXXXXX.ckpt   model (provenance in the note field)
//! checkpoints/step-XXXXXXXX.json   checkpoint metadata
//! train_log.csv
//! examples_seen.csv                step,context,examples_seen
//! results.csv                      written last; marks the run complete
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use polarity_core::corpus::Corpus;
use polarity_core::lexicon::ContextType;
use polarity_core::lm::{
    train_prepared, CheckpointMeta, CheckpointedModel, LmConfig, LmError, PreparedData, TrainLogRow,
};
use polarity_core::pairs::{evaluate_checkpoint, read_results_csv, write_results_csv, EvalRow, ExampleSchedule, MinimalPair};
use polarity_core::scope::LicensedOccurrence;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{read_bytes, read_text, write_atomic};
use crate::provenance::Provenance;

pub const RESULTS_FILE: &str = "results.csv";
pub const EXAMPLES_FILE: &str = "examples_seen.csv";
pub const LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(CHECKPOINT_DIR).join(format!("step-{step:08}.ckpt"))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    meta: CheckpointMeta,
}

pub struct RunSpec<'a> {
    pub corpus: &'a Corpus,
    /// Licensed occurrences of `corpus`, for the examples-seen schedule.
    pub occurrences: Option<&'a [LicensedOccurrence]>,
    pub pairs: Option<&'a [MinimalPair]>,
    pub config: LmConfig,
    pub keep_checkpoints: bool,
    pub provenance: &'a Provenance,
}

#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<EvalRow>,
    pub log: Vec<TrainLogRow>,
    /// Whether results were loaded from a completed earlier run.
    pub reused: bool,
}

fn schedule_csv(schedule: &ExampleSchedule, steps: &[u64], provenance: &Provenance) -> String {
    let mut out = provenance.csv_comment();
    out.push_str("step,context,examples_seen\n");
    for &step in steps {
        for ctx in ContextType::ALL {
            let _ = writeln!(out, "{step},{ctx},{}", schedule.seen(ctx, step));
        }
    }
    out
}

/// Reads an `examples_seen.csv` into a (context, step) lookup.
pub fn read_examples_seen(path: &Path) -> CliResult<BTreeMap<(ContextType, u64), f64>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<(u64, ContextType, f64)>() {
        let (step, ctx, seen) = row.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        out.insert((ctx, step), seen);
    }
    Ok(out)
}

fn log_csv(log: &[TrainLogRow], provenance: &Provenance) -> String {
    let mut out = provenance.csv_comment();
    out.push_str(TrainLogRow::CSV_HEADER);
    out.push('\n');
    for row in log {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// Trains (or reuses a completed run in) `dir`.
pub fn run(spec: &RunSpec<'_>, dir: &Path) -> CliResult<RunOutput> {
    let results_path = dir.join(RESULTS_FILE);
    if spec.pairs.is_some() && results_path.exists() {
        let text = read_text(&results_path)?;
        if crate::provenance::from_csv(&text).as_ref() == Some(spec.provenance) {
            info!("reusing completed run {}", dir.display());
            return Ok(RunOutput {
                rows: read_results_csv(&text)?,
                log: Vec::new(),
                reused: true,
            });
        }
    }
    let data = PreparedData::new(spec.corpus, &spec.config)?;
    let layout = data.layout(&spec.config);
    let schedule = spec
        .occurrences
        .map(|occ| ExampleSchedule::new(spec.corpus, occ, data.train_sentences, &layout));
    let seen = |ctx: ContextType, step: u64| schedule.as_ref().map_or(0.0, |s| s.seen(ctx, step) as f64);
    let note = spec.provenance.to_json();
    let mut rows = Vec::new();
    let mut steps = Vec::new();
    let mut hook = |model: &CheckpointedModel<f32>, _row: &TrainLogRow| -> Result<(), LmError> {
        let meta = model.meta();
        steps.push(meta.step);
        if spec.keep_checkpoints {
            let path = checkpoint_path(dir, meta.step);
            let sidecar = serde_json::to_string_pretty(&Sidecar {
                provenance: spec.provenance,
                meta,
            })
            .expect("sidecar serializes");
            write_atomic(&path, &model.to_bytes_annotated(&note))
                .and_then(|_| write_atomic(&path.with_extension("json"), (sidecar + "\n").as_bytes()))
                .map_err(|e| LmError::Hook(e.to_string()))?;
        }
        if let Some(pairs) = spec.pairs {
            rows.extend(evaluate_checkpoint(&meta, model, pairs, &seen).map_err(|e| LmError::Hook(e.to_string()))?);
        }
        Ok(())
    };
    let result = train_prepared::<f32>(&data, &spec.config, &mut hook)?;
    info!(
        "trained {} batches, {} checkpoints into {}",
        result.total_batches,
        result.checkpoints_emitted,
        dir.display()
    );
    write_atomic(&dir.join(LOG_FILE), log_csv(&result.log, spec.provenance).as_bytes())?;
    if let Some(s) = &schedule {
        write_atomic(&dir.join(EXAMPLES_FILE), schedule_csv(s, &steps, spec.provenance).as_bytes())?;
    }
    if spec.pairs.is_some() {
        let text = spec.provenance.csv_comment() + &write_results_csv(&rows);
        write_atomic(&results_path, text.as_bytes())?;
    }
    Ok(RunOutput {
        rows,
        log: result.log,
        reused: false,
    })
}

/// Loads every checkpoint of a run directory, ascending by step.
pub fn load_checkpoints(dir: &Path) -> CliResult<Vec<CheckpointedModel<f32>>> {
    let ckpt_dir = dir.join(CHECKPOINT_DIR);
    let entries = std::fs::read_dir(&ckpt_dir).map_err(|e| CliError::io(&ckpt_dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "ckpt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::input(format!("no checkpoints in {}", ckpt_dir.display())));
    }
    let mut models = Vec::with_capacity(paths.len());
    for p in &paths {
        let model = CheckpointedModel::<f32>::from_bytes(&read_bytes(p)?).map_err(|e| CliError::from(e).context(p.display()))?;
        models.push(model);
    }
    models.sort_by_key(|m| m.step);
    Ok(models)
}
