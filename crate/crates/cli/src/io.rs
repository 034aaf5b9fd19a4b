use std::path::Path;

use polarity_core::corpus::{parse_conllu, tokenize_plain, Corpus};

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Writes through a temporary sibling and a rename, creating parent
/// directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    std::fs::write(tmp, bytes).map_err(|e| CliError::io(tmp, e))?;
    std::fs::rename(tmp, path).map_err(|e| CliError::io(path, e))
}

/// CoNLL-U unless the extension is `.txt`, which is read as one
/// whitespace-tokenised sentence per line.
pub fn read_corpus(path: &Path) -> CliResult<Corpus> {
    let text = read_text(path)?;
    if path.extension().is_some_and(|e| e == "txt") {
        return Ok(tokenize_plain(&text));
    }
    parse_conllu(&text).map_err(|e| CliError::from(e).context(path.display()))
}
