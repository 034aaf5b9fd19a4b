//! Both experiments end to end on a synthetic corpus: all-context models
//! for the frequency/efficiency correlation, single-context models for
//! the area between curves.
//!
//! Output layout:
//!
//! ```text
//! provenance.json
//! corpus/{corpus.conllu, gold.jsonl, frequencies.csv, pairs.jsonl}
//! runs/all/seed-<i>/...              see [`crate::runs`]
//! runs/single-<context>/plan.json
//! runs/single-<context>/seed-<i>/...
//! report.json, curves_*.csv, figures/*.svg
//! ```
//!
//! A run directory whose `results.csv` carries the same provenance is
//! reused, so an interrupted experiment resumes where it stopped.

use std::collections::BTreeMap;
use std::path::Path;

use log::{info, warn};
use polarity_core::ablation::{apply_ablation, plan_ablation};
use polarity_core::corpus::{write_conllu, Corpus};
use polarity_core::dynamics::LearningCurve;
use polarity_core::lexicon::{ContextType, Lexicon};
use polarity_core::pairs::{generate_pairs, parse_templates, rows_to_curves, write_pairs_jsonl, MinimalPair};
use polarity_core::scope::{scan_corpus, write_occurrences_jsonl, FrequencyTable, LicensedOccurrence};
use polarity_core::synth::{generate_corpus, gold_occurrences, gold_records, GoldAnnotation, GrammarSpec};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{read_text, write_atomic};
use crate::provenance::Provenance;
use crate::report::{analyze, Analysis, AnalysisSettings};
use crate::runs::{self, RunSpec};
use crate::seeds;

/// Synthetic corpus, its gold occurrences and the evaluation pairs.
pub struct ExperimentData {
    pub grammar: GrammarSpec,
    pub corpus: Corpus,
    pub gold: Vec<GoldAnnotation>,
    pub occurrences: Vec<LicensedOccurrence>,
    pub pairs: Vec<MinimalPair>,
    /// Realised rate per 100k sentences of each scheduled context, as in
    /// `frequencies.csv`.
    pub frequencies: BTreeMap<ContextType, f64>,
}

pub fn prepare_data(config: &RunConfig) -> CliResult<ExperimentData> {
    let grammar = config.grammar()?;
    let (corpus, gold) = generate_corpus(&grammar, config.corpus.sentences, seeds::derive_seed(config.seed, seeds::CORPUS))?;
    let occurrences = gold_occurrences(&gold);
    let table = FrequencyTable::from_occurrences(&occurrences, corpus.len());
    let frequencies = grammar
        .contexts
        .keys()
        .map(|c| (*c, table.per_100k(*c) as f64))
        .collect();
    let templates = match &config.pairs.templates {
        Some(path) => parse_templates(&read_text(path)?)?,
        None => grammar.pair_templates(),
    };
    let generated = generate_pairs(&templates, config.pairs.per_context, seeds::derive_seed(config.seed, seeds::PAIRS));
    for (ctx, got) in &generated.shortfalls {
        warn!("only {got} distinct pairs for {ctx}");
    }
    let pairs: Vec<MinimalPair> = generated
        .pairs
        .into_iter()
        .filter(|p| grammar.contexts.contains_key(&p.context))
        .collect();
    if let Some(c) = grammar.contexts.keys().find(|c| !pairs.iter().any(|p| p.context == **c)) {
        return Err(CliError::input(format!("no evaluation pairs for context {c}")));
    }
    Ok(ExperimentData {
        grammar,
        corpus,
        gold,
        occurrences,
        pairs,
        frequencies,
    })
}

fn write_data(data: &ExperimentData, dir: &Path, provenance: &Provenance) -> CliResult<()> {
    let gold = gold_records(&data.corpus, &data.gold);
    let table = FrequencyTable::from_occurrences(&data.occurrences, data.corpus.len());
    write_atomic(
        &dir.join("corpus.conllu"),
        (provenance.conllu_comment() + &write_conllu(&data.corpus)).as_bytes(),
    )?;
    write_atomic(
        &dir.join("gold.jsonl"),
        (provenance.jsonl_header() + &write_occurrences_jsonl(&gold)).as_bytes(),
    )?;
    write_atomic(&dir.join("frequencies.csv"), (provenance.csv_comment() + &table.to_csv()).as_bytes())?;
    write_atomic(
        &dir.join("pairs.jsonl"),
        (provenance.jsonl_header() + &write_pairs_jsonl(&data.pairs)).as_bytes(),
    )
}

/// Claims `out` for this configuration, refusing a directory that holds
/// another configuration's results.
fn claim(out: &Path, provenance: &Provenance) -> CliResult<()> {
    let path = out.join("provenance.json");
    let json = serde_json::to_string_pretty(provenance).expect("provenance serializes") + "\n";
    if path.exists() {
        let existing = read_text(&path)?;
        if existing != json {
            return Err(CliError::input(format!(
                "{} belongs to a different configuration; use a fresh output directory",
                out.display()
            )));
        }
        return Ok(());
    }
    write_atomic(&path, json.as_bytes())
}

fn single_context_corpus(
    data: &ExperimentData,
    keep: ContextType,
    seed: u64,
    dir: &Path,
    provenance: &Provenance,
) -> CliResult<(Corpus, Vec<LicensedOccurrence>)> {
    let plan = plan_ablation(&data.corpus, &data.occurrences, keep, seed)?;
    let ablated = apply_ablation(&data.corpus, &plan)?;
    let rescan = scan_corpus(&ablated, &Lexicon::bundled())?;
    if let Some(o) = rescan.occurrences.iter().find(|o| o.context != keep) {
        return Err(CliError::input(format!(
            "single-context corpus for {keep} still licenses {} in sentence {}",
            o.context, o.sentence_id
        )));
    }
    let plan_json = format!(
        "{{\n\"provenance\": {},\n\"plan\": {}\n}}\n",
        provenance.to_json(),
        plan.to_json()
    );
    write_atomic(&dir.join("plan.json"), plan_json.as_bytes())?;
    Ok((ablated, rescan.occurrences))
}

pub fn settings(config: &RunConfig) -> AnalysisSettings {
    AnalysisSettings {
        smoothing: config.smoothing,
        final_accuracy: config.analysis.final_accuracy,
        correlation_unit: config.analysis.correlation_unit,
    }
}

/// Runs the configured experiment into `out` and writes the report.
pub fn run_experiment(config: &RunConfig, out: &Path) -> CliResult<Analysis> {
    let provenance = Provenance::new("experiment", config);
    claim(out, &provenance)?;
    let data = prepare_data(config)?;
    write_data(&data, &out.join("corpus"), &provenance)?;
    let lm = config.lm_config()?;
    let training_seeds = seeds::training_seeds(config.seed, config.seeds);

    let mut all_curves: Vec<LearningCurve> = Vec::new();
    for (i, &seed) in training_seeds.iter().enumerate() {
        info!("all-context model, seed {}/{}", i + 1, training_seeds.len());
        let spec = RunSpec {
            corpus: &data.corpus,
            occurrences: Some(&data.occurrences),
            pairs: Some(&data.pairs),
            config: polarity_core::lm::LmConfig { seed, ..lm.clone() },
            keep_checkpoints: config.experiment.keep_checkpoints,
            provenance: &provenance,
        };
        let output = runs::run(&spec, &out.join("runs/all").join(format!("seed-{i}")))?;
        all_curves.extend(rows_to_curves(&output.rows, seed));
    }

    let mut single_curves = Vec::new();
    if config.experiment.single_context {
        let ablation_seed = seeds::derive_seed(config.seed, seeds::ABLATION);
        for &keep in data.grammar.contexts.keys() {
            let dir = out.join("runs").join(format!("single-{keep}"));
            let (corpus, occurrences) = single_context_corpus(&data, keep, ablation_seed, &dir, &provenance)?;
            let pairs: Vec<MinimalPair> = data.pairs.iter().filter(|p| p.context == keep).cloned().collect();
            for (i, &seed) in training_seeds.iter().enumerate() {
                info!("single-context model for {keep}, seed {}/{}", i + 1, training_seeds.len());
                let spec = RunSpec {
                    corpus: &corpus,
                    occurrences: Some(&occurrences),
                    pairs: Some(&pairs),
                    config: polarity_core::lm::LmConfig { seed, ..lm.clone() },
                    keep_checkpoints: config.experiment.keep_checkpoints,
                    provenance: &provenance,
                };
                let output = runs::run(&spec, &dir.join(format!("seed-{i}")))?;
                single_curves.extend(rows_to_curves(&output.rows, seed));
            }
        }
    }

    let analysis = analyze(&all_curves, &single_curves, &data.frequencies, settings(config), provenance)?;
    analysis.write(out)?;
    Ok(analysis)
}
