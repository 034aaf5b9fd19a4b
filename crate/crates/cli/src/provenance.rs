//! The provenance block embedded in every output file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub streams: BTreeMap<String, u64>,
    pub training_seeds: Vec<u64>,
}

const CSV_PREFIX: &str = "# provenance: ";

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            master_seed: config.seed,
            streams: seeds::stream_table(config.seed),
            training_seeds: seeds::training_seeds(config.seed, config.seeds),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("provenance serializes")
    }

    /// Leading comment line for CSV files.
    pub fn csv_comment(&self) -> String {
        format!("{CSV_PREFIX}{}\n", self.to_json())
    }

    /// Leading comment line for CoNLL-U files.
    pub fn conllu_comment(&self) -> String {
        format!("# provenance = {}\n", self.to_json())
    }

    /// First record of a JSON-lines file.
    pub fn jsonl_header(&self) -> String {
        format!("{{\"provenance\":{}}}\n", self.to_json())
    }

    pub fn svg_comment(&self) -> String {
        format!("<!-- provenance: {} -->\n", self.to_json().replace("--", "- -"))
    }
}

/// Splits off a leading provenance record of a JSON-lines file.
pub fn split_jsonl(text: &str) -> (Option<Provenance>, &str) {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Header {
        provenance: Provenance,
    }
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    match serde_json::from_str::<Header>(first) {
        Ok(h) => (Some(h.provenance), rest),
        Err(_) => (None, text),
    }
}

/// Provenance from a leading CSV comment line.
pub fn from_csv(text: &str) -> Option<Provenance> {
    text.lines()
        .next()
        .and_then(|l| l.strip_prefix(CSV_PREFIX))
        .and_then(|j| serde_json::from_str(j).ok())
}
