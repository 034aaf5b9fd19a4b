//! Run configuration: a TOML file, `--set key=value` overrides and
//! explicit flags, applied in that order. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use polarity_core::dynamics::{CorrelationUnit, FinalAccuracy, SmoothingConfig};
use polarity_core::lexicon::ContextType;
use polarity_core::lm::LmConfig;
use polarity_core::synth::GrammarSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed all named streams derive from.
    pub seed: u64,
    /// Number of training seeds per model.
    pub seeds: usize,
    pub lm: LmSection,
    pub smoothing: SmoothingConfig,
    pub analysis: AnalysisSection,
    pub corpus: CorpusSection,
    pub pairs: PairsSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            seeds: 5,
            lm: LmSection::default(),
            smoothing: SmoothingConfig::default(),
            analysis: AnalysisSection::default(),
            corpus: CorpusSection::default(),
            pairs: PairsSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

/// A named profile plus any [`LmConfig`] fields to override.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmSection {
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(flatten)]
    pub overrides: toml::Table,
}

fn default_profile() -> String {
    "desk".into()
}

impl Default for LmSection {
    fn default() -> Self {
        LmSection {
            profile: default_profile(),
            overrides: toml::Table::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub final_accuracy: FinalAccuracy,
    pub correlation_unit: CorrelationUnit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    /// Grammar file; the bundled grammar when absent.
    pub grammar: Option<PathBuf>,
    pub sentences: usize,
    /// Contexts to keep and their rates per 100k sentences; all grammar
    /// contexts at their own rates when empty.
    pub frequencies: BTreeMap<ContextType, f64>,
    /// Size of the multi-licensor suite written by `synth`.
    pub multi_sentences: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            grammar: None,
            sentences: 50_000,
            frequencies: BTreeMap::new(),
            multi_sentences: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairsSection {
    pub per_context: usize,
    /// Template file; templates derived from the grammar frames when absent.
    pub templates: Option<PathBuf>,
}

impl Default for PairsSection {
    fn default() -> Self {
        PairsSection {
            per_context: 60,
            templates: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Also train one single-context model per context and seed.
    pub single_context: bool,
    /// Write every checkpoint file, not only the evaluation results.
    pub keep_checkpoints: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            single_context: true,
            keep_checkpoints: true,
        }
    }
}

/// Sets `value` at a dotted `key` path, creating tables on the way.
fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> CliResult<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::input(format!("empty key in {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::input(format!("{key}: {p} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`; the value is read as TOML, or as a bare string.
pub fn parse_assignment(text: &str) -> CliResult<(String, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("expected key=value, got {text:?}")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

impl RunConfig {
    /// Layers a config file and then assignments; later wins.
    pub fn load(file: Option<&Path>, assignments: &[(String, toml::Value)]) -> CliResult<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in assignments {
            set_path(&mut table, key, value.clone())?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::input(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.lm_config()?;
        self.smoothing.validate()?;
        if self.seeds == 0 {
            return Err(CliError::input("seeds must be at least 1"));
        }
        if let FinalAccuracy::TailMean(0) = self.analysis.final_accuracy {
            return Err(CliError::input("final_accuracy tail_mean needs at least one point"));
        }
        if self.corpus.sentences == 0 || self.pairs.per_context == 0 {
            return Err(CliError::input("corpus.sentences and pairs.per_context must be positive"));
        }
        Ok(())
    }

    /// The selected profile with overrides applied. The seed field is
    /// replaced by the training stream when a model is trained.
    pub fn lm_config(&self) -> CliResult<LmConfig> {
        let base = LmConfig::profile(&self.lm.profile)?;
        let mut table = match toml::Value::try_from(&base) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("LmConfig serializes to a table"),
        };
        for (key, value) in &self.lm.overrides {
            if !table.contains_key(key) {
                return Err(CliError::input(format!("unknown key lm.{key}")));
            }
            table.insert(key.clone(), value.clone());
        }
        let config: LmConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::input(format!("lm: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn grammar(&self) -> CliResult<GrammarSpec> {
        let spec = match &self.corpus.grammar {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                GrammarSpec::parse(&text).map_err(|e| CliError::from(e).context(path.display()))?
            }
            None => GrammarSpec::bundled(),
        };
        if self.corpus.frequencies.is_empty() {
            return Ok(spec);
        }
        if let Some(c) = self.corpus.frequencies.keys().find(|c| !spec.contexts.contains_key(c)) {
            return Err(CliError::input(format!("grammar has no frames for context {c}")));
        }
        let freqs: Vec<(ContextType, f64)> = self.corpus.frequencies.iter().map(|(c, f)| (*c, *f)).collect();
        let spec = spec.restricted(&freqs);
        spec.validate()?;
        Ok(spec)
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
