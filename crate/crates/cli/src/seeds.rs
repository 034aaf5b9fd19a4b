//! Named seed streams split from one master seed.
//!
//! The seed of stream `name` is the first eight bytes (little-endian) of
//! `SHA-256("polarity-lab/<master>/<name>")`. Training seed `i` uses the
//! stream `training/<i>`.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

pub const CORPUS: &str = "corpus";
pub const PAIRS: &str = "pairs";
pub const ABLATION: &str = "ablation";
pub const GRADCHECK: &str = "gradcheck";

pub fn derive_seed(master: u64, stream: &str) -> u64 {
    let digest = Sha256::digest(format!("polarity-lab/{master}/{stream}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn training_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &format!("training/{index}"))
}

pub fn training_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count).map(|i| training_seed(master, i)).collect()
}

/// Seeds of the fixed streams, by name.
pub fn stream_table(master: u64) -> BTreeMap<String, u64> {
    [CORPUS, PAIRS, ABLATION, GRADCHECK]
        .into_iter()
        .map(|s| (s.to_string(), derive_seed(master, s)))
        .collect()
}
