//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use polarity_core::lexicon::ContextType;

use crate::commands;
use crate::config::{parse_assignment, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "polarity-lab", version, about = "NPI licensing corpus analysis and LSTM learning dynamics")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set lm.epochs=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "polarity-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Find licensed NPI occurrences and count them per context.
    Scan {
        corpus: PathBuf,
        /// Additional lexicon file. Repeatable.
        #[arg(long)]
        lexicon: Vec<PathBuf>,
    },
    /// Replace every sentence licensing a context other than `--keep`.
    Filter {
        corpus: PathBuf,
        #[arg(long)]
        keep: ContextType,
        #[arg(long)]
        lexicon: Vec<PathBuf>,
    },
    /// Train language models, one per training seed.
    Train {
        corpus: PathBuf,
        /// Minimal pairs to evaluate at every checkpoint.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Evaluate the checkpoints of a run directory on minimal pairs.
    Eval {
        run_dir: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Learning-dynamics report from results files.
    Analyze {
        /// All-context results, one file per seed.
        #[arg(long, required = true, num_args = 1..)]
        all: Vec<PathBuf>,
        /// Single-context results, one file per context and seed.
        #[arg(long, num_args = 1..)]
        single: Vec<PathBuf>,
        #[arg(long)]
        frequencies: PathBuf,
    },
    /// Run both experiments end to end on a synthetic corpus.
    Experiment {
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        sentences: Option<usize>,
    },
    /// Generate a synthetic corpus with gold annotations and pairs.
    Synth {
        #[arg(long)]
        sentences: Option<usize>,
    },
    /// Check the LSTM backward pass against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
    },
}

impl Cli {
    /// Config file, then `--set`, then explicit flags.
    pub fn resolve_config(&self) -> CliResult<RunConfig> {
        let mut assignments = self
            .set
            .iter()
            .map(|s| parse_assignment(s))
            .collect::<CliResult<Vec<_>>>()?;
        let mut flag = |key: &str, value: toml::Value| assignments.push((key.to_string(), value));
        if let Some(seed) = self.seed {
            flag("seed", to_int(seed as u128)?);
        }
        match &self.command {
            Command::Train { profile, seeds, .. } | Command::Experiment { profile, seeds, .. } => {
                if let Some(p) = profile {
                    flag("lm.profile", toml::Value::String(p.clone()));
                }
                if let Some(n) = seeds {
                    flag("seeds", to_int(*n as u128)?);
                }
            }
            _ => {}
        }
        if let Command::Experiment { sentences: Some(n), .. } | Command::Synth { sentences: Some(n) } = &self.command {
            flag("corpus.sentences", to_int(*n as u128)?);
        }
        RunConfig::load(self.config.as_deref(), &assignments)
    }
}

fn to_int(v: u128) -> CliResult<toml::Value> {
    i64::try_from(v)
        .map(toml::Value::Integer)
        .map_err(|_| CliError::input(format!("{v} does not fit a configuration integer")))
}

pub fn dispatch(cli: &Cli) -> CliResult<String> {
    let config = cli.resolve_config()?;
    let out = &cli.out;
    match &cli.command {
        Command::Scan { corpus, lexicon } => commands::scan(&config, corpus, lexicon, out),
        Command::Filter { corpus, keep, lexicon } => commands::filter(&config, corpus, *keep, lexicon, out),
        Command::Train { corpus, pairs, .. } => commands::train(&config, corpus, pairs.as_deref(), out),
        Command::Eval { run_dir, pairs } => commands::eval(&config, run_dir, pairs, out),
        Command::Analyze { all, single, frequencies } => commands::analyze_files(&config, all, single, frequencies, out),
        Command::Experiment { .. } => commands::experiment(&config, out),
        Command::Synth { .. } => commands::synth(&config, out),
        Command::Gradcheck { cases, threshold } => commands::gradcheck(&config, *cases, *threshold, out),
    }
}

/// Parses the process arguments, runs the command and returns the exit
/// code.
pub fn run_main() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("polarity-lab: {e}");
            e.exit_code()
        }
    }
}
