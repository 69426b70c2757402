use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Fingerprint of the sample identifiers a fitted object was estimated from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub ids_hash: String,
    pub count: usize,
}

impl Provenance {
    /// Order-insensitive: ids are sorted and deduplicated before hashing.
    pub fn from_ids<I: IntoIterator<Item = u64>>(ids: I) -> Self {
        let mut ids: Vec<u64> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        let mut hasher = Sha256::new();
        for id in &ids {
            hasher.update(id.to_le_bytes());
        }
        Provenance {
            ids_hash: hex::encode(hasher.finalize()),
            count: ids.len(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
