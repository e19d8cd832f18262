use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::state::Digest32;
use super::types::TransactionRecord;
use super::LedgerError;

pub const ZERO_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

/// One committed block. `hash` covers height, previous hash and the
/// canonical JSON encoding of the transactions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub height: u64,
    pub channel: String,
    pub prev_hash: String,
    pub hash: String,
    pub transactions: Vec<TransactionRecord>,
}

impl Block {
    pub fn genesis(channel: &str) -> Self {
        Self::seal(0, channel, ZERO_HASH.to_string(), Vec::new())
    }

    pub fn seal(height: u64, channel: &str, prev_hash: String, transactions: Vec<TransactionRecord>) -> Self {
        let hash = hex::encode(Self::compute_hash(height, channel, &prev_hash, &transactions));
        Self {
            height,
            channel: channel.to_string(),
            prev_hash,
            hash,
            transactions,
        }
    }

    pub fn compute_hash(
        height: u64,
        channel: &str,
        prev_hash: &str,
        transactions: &[TransactionRecord],
    ) -> Digest32 {
        let mut hasher = Sha256::new();
        hasher.update(height.to_le_bytes());
        hasher.update((channel.len() as u64).to_le_bytes());
        hasher.update(channel.as_bytes());
        hasher.update(prev_hash.as_bytes());
        hasher.update(serde_json::to_vec(transactions).expect("transactions serialize"));
        hasher.finalize().into()
    }

    pub fn hash_matches(&self) -> bool {
        hex::encode(Self::compute_hash(
            self.height,
            &self.channel,
            &self.prev_hash,
            &self.transactions,
        )) == self.hash
    }

    /// Canonical one-line JSON encoding used by the block log.
    pub fn to_log_line(&self) -> String {
        serde_json::to_string(self).expect("block serializes")
    }
}

/// Checks heights, previous-hash links and every block hash.
pub fn verify_chain(blocks: &[Block]) -> Result<(), LedgerError> {
    let mut prev = ZERO_HASH.to_string();
    for (i, block) in blocks.iter().enumerate() {
        if block.height != i as u64 || block.prev_hash != prev || !block.hash_matches() {
            return Err(LedgerError::BrokenHashChain { height: i as u64 });
        }
        if i > 0 && block.channel != blocks[0].channel {
            return Err(LedgerError::BrokenHashChain { height: i as u64 });
        }
        prev = block.hash.clone();
    }
    Ok(())
}

pub fn write_log<W: Write>(mut out: W, blocks: &[Block]) -> std::io::Result<()> {
    for block in blocks {
        writeln!(out, "{}", block.to_log_line())?;
    }
    out.flush()
}

/// Parses a JSON-lines block log. Every line must be the canonical
/// encoding of the block it decodes to, so any edit that survives parsing
/// still surfaces as a mismatch.
pub fn read_log<R: BufRead>(input: R) -> Result<Vec<Block>, LedgerError> {
    let mut blocks = Vec::new();
    for (index, line) in input.split(b'\n').enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| LedgerError::Io(e.to_string()))?;
        let text = std::str::from_utf8(&line).map_err(|_| LedgerError::MalformedLog {
            line: line_no,
            reason: "invalid utf-8".into(),
        })?;
        let block: Block = serde_json::from_str(text).map_err(|e| LedgerError::MalformedLog {
            line: line_no,
            reason: e.to_string(),
        })?;
        if block.to_log_line() != text {
            return Err(LedgerError::MalformedLog {
                line: line_no,
                reason: "non-canonical encoding".into(),
            });
        }
        blocks.push(block);
    }
    Ok(blocks)
}
