use std::fmt;
use std::path::Path;

use polarity_core::ablation::AblationError;
use polarity_core::corpus::CorpusError;
use polarity_core::dynamics::DynamicsError;
use polarity_core::lexicon::LexiconError;
use polarity_core::lm::LmError;
use polarity_core::pairs::PairsError;
use polarity_core::scope::ScopeError;
use polarity_core::synth::SynthError;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad input, configuration or file system state (exit 2).
    Input(String),
    /// Non-finite values or a degenerate statistic (exit 3).
    Numerical(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with `context`.
    pub fn context(self, context: impl fmt::Display) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{context}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{context}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! input_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}

input_errors!(AblationError, CorpusError, LexiconError, PairsError, ScopeError, SynthError);

impl From<LmError> for CliError {
    fn from(e: LmError) -> Self {
        match e {
            LmError::NonFiniteLoss { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::UndefinedCorrelation(_) | DynamicsError::DegenerateTest(_) => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let nan: CliError = LmError::NonFiniteLoss { step: 3 }.into();
        assert_eq!(nan.exit_code(), 3);
        let few: CliError = DynamicsError::TooFew { needed: 3, got: 2 }.into();
        assert_eq!(few.exit_code(), 2);
        let flat: CliError = DynamicsError::UndefinedCorrelation("constant".into()).into();
        assert_eq!(flat.exit_code(), 3);
        assert_eq!(CliError::input("x").context("scan").to_string(), "input error: scan: x");
    }
}
