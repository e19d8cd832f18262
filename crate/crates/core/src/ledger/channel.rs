use std::collections::{HashMap, VecDeque};

use serde_json::Value;

use super::block::{verify_chain, Block};
use super::state::{decode_int, encode_int, Version, WorldState};
use super::types::{ChannelSpec, Event, ReadWriteSet, TransactionRecord, Validity, WriteOp};
use super::LedgerError;
use crate::contract::{ContractSet, Directory, Invocation, TxContext};
use crate::time::LogicalTime;

/// Where a transaction currently sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TxLocation {
    Pending,
    Committed { height: u64, index: usize },
}

/// Ledger of one channel: committed state, block log, pending queue and the
/// delivered event stream.
pub struct ChannelLedger {
    spec: ChannelSpec,
    contracts: ContractSet,
    state: WorldState,
    blocks: Vec<Block>,
    /// State hash after each height, index = height; `None` where recording
    /// was switched off.
    snapshots: Vec<Option<String>>,
    record_snapshots: bool,
    pending: VecDeque<TransactionRecord>,
    events: Vec<Event>,
    locations: HashMap<String, TxLocation>,
    next_tx: u64,
}

impl ChannelLedger {
    pub fn new(spec: ChannelSpec, contracts: ContractSet) -> Self {
        let genesis = Block::genesis(&spec.name);
        let state = WorldState::new();
        Self {
            snapshots: vec![Some(state.state_hash_hex())],
            record_snapshots: true,
            spec,
            contracts,
            state,
            blocks: vec![genesis],
            pending: VecDeque::new(),
            events: Vec::new(),
            locations: HashMap::new(),
            next_tx: 0,
        }
    }

    /// Rebuilds a ledger from a verified block log.
    pub fn from_blocks(spec: ChannelSpec, contracts: ContractSet, blocks: Vec<Block>) -> Result<Self, LedgerError> {
        if blocks.first().is_some_and(|b| b.channel != spec.name) {
            return Err(LedgerError::BrokenHashChain { height: 0 });
        }
        let (state, snapshots) = replay_with_snapshots(&blocks)?;
        let mut ledger = Self::new(spec, contracts);
        ledger.state = state;
        ledger.snapshots = snapshots.into_iter().map(Some).collect();
        for block in &blocks {
            for (index, tx) in block.transactions.iter().enumerate() {
                ledger.locations.insert(
                    tx.tx_id.clone(),
                    TxLocation::Committed {
                        height: block.height,
                        index,
                    },
                );
                if let Some(n) = tx.tx_id.rsplit(':').next().and_then(|n| n.parse::<u64>().ok()) {
                    ledger.next_tx = ledger.next_tx.max(n + 1);
                }
                if tx.validity == Validity::Valid {
                    ledger.events.extend(tx.rwset.events.iter().cloned());
                }
            }
        }
        ledger.blocks = blocks;
        Ok(ledger)
    }

    pub fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// State hash recorded after committing block `height`.
    pub fn snapshot_hash(&self, height: u64) -> Option<&str> {
        self.snapshots.get(height as usize)?.as_deref()
    }

    /// Whether a state hash is stored after every commit. Hashing walks the
    /// whole state, so long benchmark runs switch it off.
    pub fn set_record_snapshots(&mut self, on: bool) {
        self.record_snapshots = on;
    }

    pub fn has_contract(&self, name: &str) -> bool {
        self.contracts.contains_key(name)
    }

    /// Execution against the committed state, without queuing anything.
    pub fn execute(
        &self,
        directory: &Directory,
        submitter: &str,
        tx_id: &str,
        invocation: &Invocation,
        now: LogicalTime,
    ) -> Result<(ReadWriteSet, Result<Value, crate::contract::ContractError>), LedgerError> {
        let contract = self
            .contracts
            .get(&invocation.contract)
            .ok_or_else(|| LedgerError::UnknownContract(invocation.contract.clone()))?;
        let mut ctx = TxContext::new(
            &self.state,
            &self.contracts,
            directory,
            &self.spec,
            submitter,
            tx_id,
            now,
            &invocation.contract,
        );
        let result = contract.invoke(&mut ctx, &invocation.operation, &invocation.args);
        Ok((ctx.into_rwset(), result))
    }

    /// Executes and queues. Contract failures are queued too and surface as
    /// endorsement-error at commit.
    pub fn submit(
        &mut self,
        directory: &Directory,
        submitter: &str,
        invocation: Invocation,
        now: LogicalTime,
    ) -> Result<String, LedgerError> {
        let tx_id = format!("{}:{}", self.spec.name, self.next_tx);
        let (rwset, result) = self.execute(directory, submitter, &tx_id, &invocation, now)?;
        debug_assert!(rwset.keys().all(|k| self.key_in_namespace(k)));
        self.next_tx += 1;
        let (rwset, response, error) = match result {
            Ok(value) => (rwset, value, None),
            Err(e) => (ReadWriteSet::default(), Value::Null, Some(e.code)),
        };
        self.pending.push_back(TransactionRecord {
            tx_id: tx_id.clone(),
            channel: self.spec.name.clone(),
            submitter: submitter.to_string(),
            invocation,
            rwset,
            response,
            error,
            submit_time: now,
            commit_time: now,
            validity: Validity::EndorsementError,
        });
        self.locations.insert(tx_id.clone(), TxLocation::Pending);
        Ok(tx_id)
    }

    /// Whether `key` belongs to a contract installed on this channel.
    pub fn key_in_namespace(&self, key: &str) -> bool {
        key.split_once('/')
            .is_some_and(|(ns, _)| self.contracts.contains_key(ns))
    }

    /// Orders, validates and commits up to `limit` pending transactions.
    /// Returns `None` when nothing is pending.
    pub fn commit_block(&mut self, limit: usize, now: LogicalTime) -> Option<&Block> {
        if self.pending.is_empty() || limit == 0 {
            return None;
        }
        let height = self.height() + 1;
        let take = limit.min(self.pending.len());
        let mut transactions = Vec::with_capacity(take);
        for index in 0..take {
            let mut tx = self.pending.pop_front().expect("pending length checked");
            tx.commit_time = now.max(tx.submit_time);
            tx.validity = validate_and_apply(&mut self.state, &tx, Version::new(height, index as u64));
            if tx.validity == Validity::Valid {
                self.events.extend(tx.rwset.events.iter().cloned());
            }
            self.locations
                .insert(tx.tx_id.clone(), TxLocation::Committed { height, index });
            transactions.push(tx);
        }
        let prev = self.blocks.last().expect("genesis present").hash.clone();
        self.blocks
            .push(Block::seal(height, &self.spec.name, prev, transactions));
        let snapshot = self.record_snapshots.then(|| self.state.state_hash_hex());
        self.snapshots.push(snapshot);
        self.blocks.last()
    }

    /// Committed record for `tx_id`, or `None` while pending or unknown.
    pub fn committed(&self, tx_id: &str) -> Option<&TransactionRecord> {
        match self.locations.get(tx_id)? {
            TxLocation::Pending => None,
            TxLocation::Committed { height, index } => {
                self.blocks[*height as usize].transactions.get(*index)
            }
        }
    }

    pub fn is_pending(&self, tx_id: &str) -> bool {
        matches!(self.locations.get(tx_id), Some(TxLocation::Pending))
    }
}

/// MVCC validation of one transaction against the cumulative state, applying
/// its writes at `version` when valid.
pub fn validate_and_apply(state: &mut WorldState, tx: &TransactionRecord, version: Version) -> Validity {
    if tx.error.is_some() {
        return Validity::EndorsementError;
    }
    let reads_current = tx
        .rwset
        .reads
        .iter()
        .all(|read| state.version(&read.key) == read.version);
    if !reads_current {
        return Validity::MvccConflict;
    }
    let mut resolved = Vec::with_capacity(tx.rwset.writes.len());
    for write in &tx.rwset.writes {
        let value = match &write.op {
            WriteOp::Put { value } => Some(value.clone()),
            WriteOp::Delete => None,
            WriteOp::Add { delta, min, max } => {
                let current = match state.get(&write.key) {
                    None => 0,
                    Some(v) => match decode_int(&v.value) {
                        Some(n) => n,
                        None => return Validity::MvccConflict,
                    },
                };
                let next = current + delta;
                if min.is_some_and(|m| next < m) || max.is_some_and(|m| next > m) {
                    return Validity::MvccConflict;
                }
                Some(encode_int(next))
            }
        };
        resolved.push((write.key.as_str(), value));
    }
    for (key, value) in resolved {
        match value {
            Some(bytes) => state.put(key, bytes, version),
            None => {
                state.delete(key);
            }
        }
    }
    Validity::Valid
}

/// Re-validates and applies a block log from genesis. Fails if the hash chain
/// is broken or a recorded validity disagrees with re-validation.
pub fn replay(blocks: &[Block]) -> Result<WorldState, LedgerError> {
    replay_inner(blocks, false).map(|(state, _)| state)
}

/// Like [`replay`], also returning the state hash after every height.
pub fn replay_with_snapshots(blocks: &[Block]) -> Result<(WorldState, Vec<String>), LedgerError> {
    replay_inner(blocks, true)
}

fn replay_inner(blocks: &[Block], snapshot: bool) -> Result<(WorldState, Vec<String>), LedgerError> {
    verify_chain(blocks)?;
    let mut state = WorldState::new();
    let mut snapshots = Vec::with_capacity(blocks.len());
    for block in blocks {
        for (index, tx) in block.transactions.iter().enumerate() {
            let validity = validate_and_apply(&mut state, tx, Version::new(block.height, index as u64));
            if validity != tx.validity {
                return Err(LedgerError::ReplayDivergence {
                    tx_id: tx.tx_id.clone(),
                });
            }
        }
        if snapshot {
            snapshots.push(state.state_hash_hex());
        }
    }
    Ok((state, snapshots))
}
