//! Subcommand implementations. Each writes its outputs under `out` and
//! returns a one-line summary for the terminal.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use polarity_core::ablation::{apply_ablation, plan_ablation};
use polarity_core::corpus::{write_conllu, Corpus};
use polarity_core::dynamics::LearningCurve;
use polarity_core::lexicon::{load_lexicon, ContextType, Lexicon};
use polarity_core::lm::random_tiny_check;
use polarity_core::pairs::{evaluate_checkpoint, read_pairs_jsonl, read_results_csv, rows_to_curves, write_results_csv};
use polarity_core::scope::{scan_corpus, write_occurrences_jsonl, OccurrenceRecord};
use polarity_core::synth::{gold_records, multi_licensor_suite};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::experiment::{prepare_data, run_experiment, settings};
use crate::io::{read_corpus, read_text, write_atomic};
use crate::provenance::{split_jsonl, Provenance};
use crate::report::{analyze, Analysis};
use crate::runs::{self, RunSpec};
use crate::seeds;

fn lexicon(extra: &[PathBuf]) -> CliResult<Lexicon> {
    let mut lex = Lexicon::bundled();
    for path in extra {
        let more = load_lexicon(&read_text(path)?).map_err(|e| CliError::from(e).context(path.display()))?;
        lex.extend(&more)?;
    }
    Ok(lex)
}

fn occurrence_records(corpus: &Corpus, occurrences: &[polarity_core::scope::LicensedOccurrence]) -> Vec<OccurrenceRecord> {
    occurrences
        .iter()
        .map(|o| OccurrenceRecord::new(o, corpus, false))
        .collect()
}

pub fn scan(config: &RunConfig, corpus_path: &Path, lexicons: &[PathBuf], out: &Path) -> CliResult<String> {
    let provenance = Provenance::new("scan", config);
    let corpus = read_corpus(corpus_path)?;
    let result = scan_corpus(&corpus, &lexicon(lexicons)?)?;
    let records = occurrence_records(&corpus, &result.occurrences);
    write_atomic(
        &out.join("occurrences.jsonl"),
        (provenance.jsonl_header() + &write_occurrences_jsonl(&records)).as_bytes(),
    )?;
    write_atomic(
        &out.join("frequencies.csv"),
        (provenance.csv_comment() + &result.frequencies.to_csv()).as_bytes(),
    )?;
    Ok(format!(
        "{} occurrences in {} sentences",
        result.occurrences.len(),
        corpus.len()
    ))
}

/// Removes every context but `keep` and checks the result by rescanning.
pub fn filter(config: &RunConfig, corpus_path: &Path, keep: ContextType, lexicons: &[PathBuf], out: &Path) -> CliResult<String> {
    let provenance = Provenance::new("filter", config);
    let corpus = read_corpus(corpus_path)?;
    let lex = lexicon(lexicons)?;
    let scan = scan_corpus(&corpus, &lex)?;
    let plan = plan_ablation(&corpus, &scan.occurrences, keep, seeds::derive_seed(config.seed, seeds::ABLATION))?;
    let ablated = apply_ablation(&corpus, &plan)?;
    let rescan = scan_corpus(&ablated, &lex)?;
    if let Some(o) = rescan.occurrences.iter().find(|o| o.context != keep) {
        return Err(CliError::input(format!(
            "ablated corpus still licenses {} in sentence {}",
            o.context, o.sentence_id
        )));
    }
    write_atomic(
        &out.join("corpus.conllu"),
        (provenance.conllu_comment() + &write_conllu(&ablated)).as_bytes(),
    )?;
    let plan_json = format!("{{\n\"provenance\": {},\n\"plan\": {}\n}}\n", provenance.to_json(), plan.to_json());
    write_atomic(&out.join("plan.json"), plan_json.as_bytes())?;
    let s = &plan.summary;
    Ok(format!(
        "replaced {} of {} sentences ({} at a fallback length), {} kept occurrences lost",
        s.replaced, s.sentences, s.fallback_length, s.kept_occurrences_lost
    ))
}

fn read_pairs(path: &Path) -> CliResult<Vec<polarity_core::pairs::MinimalPair>> {
    let text = read_text(path)?;
    let (_, body) = split_jsonl(&text);
    read_pairs_jsonl(body).map_err(|e| CliError::from(e).context(path.display()))
}

/// Trains one model per training seed into `out/seed-<i>`.
pub fn train(config: &RunConfig, corpus_path: &Path, pairs_path: Option<&Path>, out: &Path) -> CliResult<String> {
    let provenance = Provenance::new("train", config);
    let corpus = read_corpus(corpus_path)?;
    let occurrences = if corpus.parsed {
        Some(scan_corpus(&corpus, &Lexicon::bundled())?.occurrences)
    } else {
        warn!("unparsed corpus: examples seen per context will be zero");
        None
    };
    let pairs = pairs_path.map(read_pairs).transpose()?;
    let lm = config.lm_config()?;
    let mut last_loss = None;
    for (i, seed) in seeds::training_seeds(config.seed, config.seeds).into_iter().enumerate() {
        info!("training seed {}/{}", i + 1, config.seeds);
        let spec = RunSpec {
            corpus: &corpus,
            occurrences: occurrences.as_deref(),
            pairs: pairs.as_deref(),
            config: polarity_core::lm::LmConfig { seed, ..lm.clone() },
            keep_checkpoints: true,
            provenance: &provenance,
        };
        let output = runs::run(&spec, &out.join(format!("seed-{i}")))?;
        last_loss = output.log.iter().rev().find_map(|r| r.val_loss).or(last_loss);
    }
    let loss = last_loss.map_or("n/a".to_string(), |l| format!("{l:.4}"));
    Ok(format!("trained {} model(s); last validation loss {loss}", config.seeds))
}

/// Evaluates every checkpoint of a run directory on a pairs file.
pub fn eval(config: &RunConfig, run_dir: &Path, pairs_path: &Path, out: &Path) -> CliResult<String> {
    let provenance = Provenance::new("eval", config);
    let pairs = read_pairs(pairs_path)?;
    let models = runs::load_checkpoints(run_dir)?;
    let seen_path = run_dir.join(runs::EXAMPLES_FILE);
    let seen = if seen_path.exists() {
        runs::read_examples_seen(&seen_path)?
    } else {
        BTreeMap::new()
    };
    let lookup = |ctx: ContextType, step: u64| seen.get(&(ctx, step)).copied().unwrap_or(0.0);
    let mut rows = Vec::new();
    for model in &models {
        rows.extend(evaluate_checkpoint(&model.meta(), model, &pairs, &lookup)?);
    }
    write_atomic(
        &out.join(runs::RESULTS_FILE),
        (provenance.csv_comment() + &write_results_csv(&rows)).as_bytes(),
    )?;
    let last = models.last().expect("non-empty").step;
    let summary: Vec<String> = rows
        .iter()
        .filter(|r| r.checkpoint_step == last)
        .map(|r| format!("{} {:.3}", r.context, r.accuracy))
        .collect();
    Ok(format!("{} checkpoints; final: {}", models.len(), summary.join(", ")))
}

#[derive(Deserialize)]
struct FrequencyRow {
    context: ContextType,
    per_100k: f64,
}

/// Reads the rate column of a `frequencies.csv`.
pub fn read_frequencies(path: &Path) -> CliResult<BTreeMap<ContextType, f64>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    reader
        .deserialize::<FrequencyRow>()
        .map(|r| {
            r.map(|r| (r.context, r.per_100k))
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn read_rows(path: &Path) -> CliResult<Vec<polarity_core::pairs::EvalRow>> {
    read_results_csv(&read_text(path)?).map_err(|e| CliError::from(e).context(path.display()))
}

/// Loads results files as curves. The i-th file holding a context gets
/// seed i for that context, which pairs all-context and single-context
/// runs by position.
pub fn load_curves(paths: &[PathBuf]) -> CliResult<Vec<LearningCurve>> {
    let mut next_seed: BTreeMap<ContextType, u64> = BTreeMap::new();
    let mut curves = Vec::new();
    for path in paths {
        for mut curve in rows_to_curves(&read_rows(path)?, 0) {
            let seed = next_seed.entry(curve.context).or_insert(0);
            curve.seed = *seed;
            *seed += 1;
            curves.push(curve);
        }
    }
    Ok(curves)
}

/// Fails with exit 3 when the report holds degenerate statistics, after
/// the outputs have been written.
fn check_degenerate(analysis: &Analysis) -> CliResult<()> {
    if analysis.report.degenerate.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(analysis.report.degenerate.join("; ")))
    }
}

fn summarise(analysis: &Analysis) -> String {
    let r = &analysis.report;
    let mut parts = Vec::new();
    if let Some(fe) = &r.frequency_efficiency {
        parts.push(format!("frequency/efficiency r = {:.3} (p = {:.3})", fe.correlation.statistic, fe.correlation.p_value));
    }
    if let Some(t) = &r.transfer {
        parts.push(format!("mean normalised AbC = {:.4}", t.mean_normalized_abc));
        if let Some(test) = &t.t_test {
            parts.push(format!("t = {:.3} (p = {:.3})", test.statistic, test.p_value));
        }
    }
    if parts.is_empty() {
        parts.push(format!("{} context(s) analysed", r.contexts.len()));
    }
    parts.join("; ")
}

pub fn analyze_files(
    config: &RunConfig,
    all: &[PathBuf],
    single: &[PathBuf],
    frequencies: &Path,
    out: &Path,
) -> CliResult<String> {
    let provenance = Provenance::new("analyze", config);
    let all_curves = load_curves(all)?;
    let single_curves = load_curves(single)?;
    let freq = read_frequencies(frequencies)?;
    let analysis = analyze(&all_curves, &single_curves, &freq, settings(config), provenance)?;
    analysis.write(out)?;
    check_degenerate(&analysis)?;
    Ok(summarise(&analysis))
}

pub fn experiment(config: &RunConfig, out: &Path) -> CliResult<String> {
    let analysis = run_experiment(config, out)?;
    check_degenerate(&analysis)?;
    Ok(summarise(&analysis))
}

/// Writes a synthetic corpus with gold annotations, its frequency table,
/// evaluation pairs and a multi-licensor suite.
pub fn synth(config: &RunConfig, out: &Path) -> CliResult<String> {
    let provenance = Provenance::new("synth", config);
    let data = prepare_data(config)?;
    let table = polarity_core::scope::FrequencyTable::from_occurrences(&data.occurrences, data.corpus.len());
    let jsonl = |records: &[OccurrenceRecord]| provenance.jsonl_header() + &write_occurrences_jsonl(records);
    write_atomic(
        &out.join("corpus.conllu"),
        (provenance.conllu_comment() + &write_conllu(&data.corpus)).as_bytes(),
    )?;
    write_atomic(&out.join("gold.jsonl"), jsonl(&gold_records(&data.corpus, &data.gold)).as_bytes())?;
    write_atomic(&out.join("frequencies.csv"), (provenance.csv_comment() + &table.to_csv()).as_bytes())?;
    write_atomic(
        &out.join("pairs.jsonl"),
        (provenance.jsonl_header() + &polarity_core::pairs::write_pairs_jsonl(&data.pairs)).as_bytes(),
    )?;
    let mut summary = format!("{} sentences, {} gold occurrences", data.corpus.len(), data.occurrences.len());
    if config.corpus.multi_sentences > 0 && !data.grammar.multi.is_empty() && data.grammar.contexts.len() >= 2 {
        let seed = seeds::derive_seed(config.seed, seeds::CORPUS).wrapping_add(1);
        let (multi, gold) = multi_licensor_suite(&data.grammar, config.corpus.multi_sentences, seed)?;
        write_atomic(
            &out.join("multi.conllu"),
            (provenance.conllu_comment() + &write_conllu(&multi)).as_bytes(),
        )?;
        write_atomic(&out.join("multi_gold.jsonl"), jsonl(&gold_records(&multi, &gold)).as_bytes())?;
        summary.push_str(&format!(", {} multi-licensor sentences", multi.len()));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct GradCheckCase {
    seed: u64,
    vocab: usize,
    embed: usize,
    hidden: usize,
    layers: usize,
    seq_len: usize,
    batch: usize,
    dropout: f64,
    checked: usize,
    max_rel_error: f64,
    worst_tensor: String,
    worst_index: usize,
}

#[derive(Serialize)]
struct GradCheckOutput<'a> {
    provenance: &'a Provenance,
    threshold: f64,
    max_rel_error: f64,
    cases: Vec<GradCheckCase>,
}

/// Checks the backward pass on `cases` random tiny models; exit 3 when
/// any relative error exceeds `threshold`.
pub fn gradcheck(config: &RunConfig, cases: usize, threshold: f64, out: &Path) -> CliResult<String> {
    let provenance = Provenance::new("gradcheck", config);
    let base = seeds::derive_seed(config.seed, seeds::GRADCHECK);
    let mut results = Vec::with_capacity(cases);
    for i in 0..cases as u64 {
        let seed = base.wrapping_add(i);
        let (case, report) = random_tiny_check(seed);
        results.push(GradCheckCase {
            seed,
            vocab: case.vocab,
            embed: case.embed,
            hidden: case.hidden,
            layers: case.layers,
            seq_len: case.seq_len,
            batch: case.batch,
            dropout: case.dropout,
            checked: report.checked,
            max_rel_error: report.max_rel_error,
            worst_tensor: report.worst.0,
            worst_index: report.worst.1,
        });
    }
    let max = results.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let output = GradCheckOutput {
        provenance: &provenance,
        threshold,
        max_rel_error: max,
        cases: results,
    };
    let json = serde_json::to_string_pretty(&output).expect("report serializes") + "\n";
    write_atomic(&out.join("gradcheck.json"), json.as_bytes())?;
    let summary = format!("{cases} cases, max relative error {max:.3e}");
    if !(max <= threshold) {
        return Err(CliError::Numerical(format!("{summary} exceeds {threshold:e}")));
    }
    Ok(summary)
}
