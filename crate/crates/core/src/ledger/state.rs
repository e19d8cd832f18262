use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Position of the write that produced a value: block height and index of the
/// transaction inside that block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Version {
    pub height: u64,
    pub tx_index: u64,
}

impl Version {
    pub fn new(height: u64, tx_index: u64) -> Self {
        Self { height, tx_index }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionedValue {
    #[serde(with = "hex")]
    pub value: Vec<u8>,
    pub version: Version,
}

/// A 32-byte SHA-256 digest rendered as lowercase hex in logs.
pub type Digest32 = [u8; 32];

/// Committed key-value view of one channel. Keys are namespaced
/// `contract/key`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    entries: BTreeMap<String, VersionedValue>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&VersionedValue> {
        self.entries.get(key)
    }

    pub fn version(&self, key: &str) -> Option<Version> {
        self.entries.get(key).map(|v| v.version)
    }

    pub fn put(&mut self, key: impl Into<String>, value: Vec<u8>, version: Version) {
        self.entries
            .insert(key.into(), VersionedValue { value, version });
    }

    pub fn delete(&mut self, key: &str) -> Option<VersionedValue> {
        self.entries.remove(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &VersionedValue)> {
        self.entries.iter()
    }

    /// Entries whose key starts with `prefix`, in key order.
    pub fn scan<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a String, &'a VersionedValue)> + 'a {
        self.entries
            .range(prefix.to_string()..)
            .take_while(move |(k, _)| k.starts_with(prefix))
    }

    /// Plain key/value view without versions.
    pub fn values(&self) -> BTreeMap<String, Vec<u8>> {
        self.entries
            .iter()
            .map(|(k, v)| (k.clone(), v.value.clone()))
            .collect()
    }

    /// SHA-256 over the sorted entries, each encoded as
    /// `len(key) key len(value) value height tx_index` with little-endian u64s.
    pub fn state_hash(&self) -> Digest32 {
        let mut hasher = Sha256::new();
        for (key, entry) in &self.entries {
            hasher.update((key.len() as u64).to_le_bytes());
            hasher.update(key.as_bytes());
            hasher.update((entry.value.len() as u64).to_le_bytes());
            hasher.update(&entry.value);
            hasher.update(entry.version.height.to_le_bytes());
            hasher.update(entry.version.tx_index.to_le_bytes());
        }
        hasher.finalize().into()
    }

    pub fn state_hash_hex(&self) -> String {
        hex::encode(self.state_hash())
    }
}

/// Integers held in state are stored as decimal ASCII.
pub fn decode_int(bytes: &[u8]) -> Option<i64> {
    std::str::from_utf8(bytes).ok()?.parse().ok()
}

pub fn encode_int(value: i64) -> Vec<u8> {
    value.to_string().into_bytes()
}
