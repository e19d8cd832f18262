//! Contract execution: the [`Contract`] trait and the per-transaction
//! [`TxContext`] that records a read-write set against an immutable snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ledger::state::{decode_int, encode_int, Version, WorldState};
use crate::ledger::{ChannelSpec, Event, KeyRead, KeyWrite, Principal, ReadWriteSet, WriteOp};
use crate::time::LogicalTime;

/// A named operation on a named contract with a JSON argument map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    pub contract: String,
    pub operation: String,
    pub args: Value,
}

impl Invocation {
    pub fn new(contract: &str, operation: &str, args: Value) -> Self {
        Self {
            contract: contract.to_string(),
            operation: operation.to_string(),
            args,
        }
    }
}

/// Contract-level failure. `code` is a stable kebab-case label
/// (`insufficient-funds`, `wrong-phase`, ...).
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {detail}")]
pub struct ContractError {
    pub code: String,
    pub detail: String,
}

impl ContractError {
    pub fn new(code: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            detail: detail.into(),
        }
    }

    pub fn bad_args(detail: impl std::fmt::Display) -> Self {
        Self::new("bad-arguments", detail.to_string())
    }

    pub fn corrupt(key: &str) -> Self {
        Self::new("corrupt-state", format!("undecodable value at {key}"))
    }
}

pub type ContractResult<T> = Result<T, ContractError>;

/// Deterministic program executed against a snapshot. All mutation goes
/// through the [`TxContext`]; contracts hold no state of their own.
pub trait Contract: Send + Sync {
    fn name(&self) -> &str;

    fn invoke(&self, ctx: &mut TxContext<'_>, operation: &str, args: &Value) -> ContractResult<Value>;
}

pub type ContractSet = BTreeMap<String, Arc<dyn Contract>>;

/// Registered principals, derived from the base network ledger.
#[derive(Clone, Debug, Default)]
pub struct Directory {
    principals: BTreeMap<String, Principal>,
}

impl Directory {
    pub fn get(&self, id: &str) -> Option<&Principal> {
        self.principals.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.principals.contains_key(id)
    }

    pub fn insert(&mut self, principal: Principal) {
        self.principals.insert(principal.id.clone(), principal);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Principal> {
        self.principals.values()
    }

    /// Whether `id` is the channel organisation or one of its employees or
    /// departments.
    pub fn belongs_to(&self, id: &str, org: &str) -> bool {
        id == org || self.get(id).and_then(|p| p.org.as_deref()) == Some(org)
    }
}

/// Execution context for one transaction.
///
/// Keys passed to `get`/`put` are relative to the executing contract's
/// namespace; the recorded read-write set holds full `contract/key` names.
/// Reads observe the snapshot plus this transaction's own pending writes.
pub struct TxContext<'a> {
    snapshot: &'a WorldState,
    contracts: &'a ContractSet,
    pub directory: &'a Directory,
    pub channel: &'a ChannelSpec,
    pub submitter: &'a str,
    pub tx_id: &'a str,
    pub now: LogicalTime,
    namespace: String,
    caller_contract: Option<String>,
    reads: BTreeMap<String, Option<Version>>,
    peeked: BTreeSet<String>,
    writes: BTreeMap<String, WriteOp>,
    events: Vec<Event>,
}

impl<'a> TxContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        snapshot: &'a WorldState,
        contracts: &'a ContractSet,
        directory: &'a Directory,
        channel: &'a ChannelSpec,
        submitter: &'a str,
        tx_id: &'a str,
        now: LogicalTime,
        contract: &str,
    ) -> Self {
        Self {
            snapshot,
            contracts,
            directory,
            channel,
            submitter,
            tx_id,
            now,
            namespace: contract.to_string(),
            caller_contract: None,
            reads: BTreeMap::new(),
            peeked: BTreeSet::new(),
            writes: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    fn full_key(&self, key: &str) -> String {
        format!("{}/{}", self.namespace, key)
    }

    /// Name of the contract that invoked the current one, if this is a
    /// nested call.
    pub fn caller_contract(&self) -> Option<&str> {
        self.caller_contract.as_deref()
    }

    pub fn principal(&self, id: &str) -> Option<&'a Principal> {
        self.directory.get(id)
    }

    fn snapshot_int(&self, full: &str) -> ContractResult<i64> {
        match self.snapshot.get(full) {
            None => Ok(0),
            Some(v) => decode_int(&v.value).ok_or_else(|| ContractError::corrupt(full)),
        }
    }

    fn pending_view(&self, full: &str) -> ContractResult<Option<Option<Vec<u8>>>> {
        Ok(match self.writes.get(full) {
            None => None,
            Some(WriteOp::Put { value }) => Some(Some(value.clone())),
            Some(WriteOp::Delete) => Some(None),
            Some(WriteOp::Add { delta, .. }) => {
                Some(Some(encode_int(self.snapshot_int(full)? + delta)))
            }
        })
    }

    fn record_read(&mut self, full: &str) {
        if !self.reads.contains_key(full) {
            let version = self.snapshot.version(full);
            self.reads.insert(full.to_string(), version);
        }
    }

    /// Versioned read: the transaction is invalidated at commit if the key
    /// changes in between.
    pub fn get(&mut self, key: &str) -> ContractResult<Option<Vec<u8>>> {
        let full = self.full_key(key);
        self.record_read(&full);
        if let Some(pending) = self.pending_view(&full)? {
            return Ok(pending);
        }
        Ok(self.snapshot.get(&full).map(|v| v.value.clone()))
    }

    pub fn get_json<T: DeserializeOwned>(&mut self, key: &str) -> ContractResult<Option<T>> {
        match self.get(key)? {
            None => Ok(None),
            Some(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|_| ContractError::corrupt(key)),
        }
    }

    pub fn get_int(&mut self, key: &str) -> ContractResult<i64> {
        match self.get(key)? {
            None => Ok(0),
            Some(bytes) => decode_int(&bytes).ok_or_else(|| ContractError::corrupt(key)),
        }
    }

    /// Unversioned integer read. Safe only when every write that depends on
    /// the value is a guarded [`TxContext::add`]; call
    /// [`TxContext::pin_peeks`] before returning a result that depends on
    /// the value without such a guard.
    pub fn peek_int(&mut self, key: &str) -> ContractResult<i64> {
        let full = self.full_key(key);
        self.peeked.insert(full.clone());
        match self.pending_view(&full)? {
            Some(Some(bytes)) => decode_int(&bytes).ok_or_else(|| ContractError::corrupt(key)),
            Some(None) => Ok(0),
            None => self.snapshot_int(&full),
        }
    }

    /// Turns every peeked key into a versioned read.
    pub fn pin_peeks(&mut self) {
        for full in std::mem::take(&mut self.peeked) {
            self.record_read(&full);
        }
    }

    pub fn put(&mut self, key: &str, value: Vec<u8>) {
        let full = self.full_key(key);
        self.writes.insert(full, WriteOp::Put { value });
    }

    pub fn put_json<T: Serialize>(&mut self, key: &str, value: &T) {
        let bytes = serde_json::to_vec(value).expect("contract state serializes");
        self.put(key, bytes);
    }

    pub fn put_int(&mut self, key: &str, value: i64) {
        self.put(key, encode_int(value));
    }

    pub fn delete(&mut self, key: &str) {
        let full = self.full_key(key);
        self.writes.insert(full, WriteOp::Delete);
    }

    /// Guarded increment. Repeated adds to one key merge; the tightest
    /// bounds win.
    pub fn add(&mut self, key: &str, delta: i64, min: Option<i64>, max: Option<i64>) -> ContractResult<()> {
        let full = self.full_key(key);
        let merged = match self.writes.remove(&full) {
            None => WriteOp::Add { delta, min, max },
            Some(WriteOp::Add {
                delta: d0,
                min: m0,
                max: x0,
            }) => WriteOp::Add {
                delta: d0 + delta,
                min: tighter(m0, min, i64::max),
                max: tighter(x0, max, i64::min),
            },
            Some(WriteOp::Put { value }) => {
                let base = decode_int(&value).ok_or_else(|| ContractError::corrupt(key))?;
                WriteOp::Put {
                    value: encode_int(base + delta),
                }
            }
            Some(WriteOp::Delete) => WriteOp::Put {
                value: encode_int(delta),
            },
        };
        self.writes.insert(full, merged);
        Ok(())
    }

    pub fn emit(&mut self, name: &str, payload: Value) {
        let payload = match payload {
            Value::Object(map) => map.into_iter().collect(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        self.events.push(Event {
            name: name.to_string(),
            channel: self.channel.name.clone(),
            payload,
            emitting_tx: self.tx_id.to_string(),
        });
    }

    /// Calls another contract on the same channel inside this transaction.
    /// On error, the callee's writes and events are discarded; its reads stay
    /// recorded.
    pub fn invoke(&mut self, contract: &str, operation: &str, args: &Value) -> ContractResult<Value> {
        let target = self
            .contracts
            .get(contract)
            .cloned()
            .ok_or_else(|| ContractError::new("unknown-contract", contract))?;
        let saved_writes = self.writes.clone();
        let saved_events = self.events.len();
        let outer_ns = std::mem::replace(&mut self.namespace, contract.to_string());
        let outer_caller = self.caller_contract.replace(outer_ns.clone());
        let result = target.invoke(self, operation, args);
        self.namespace = outer_ns;
        self.caller_contract = outer_caller;
        if result.is_err() {
            self.writes = saved_writes;
            self.events.truncate(saved_events);
        }
        result
    }

    /// Drops writes and events, keeping reads. Used by contracts whose
    /// refusal is a normal result rather than an error.
    pub fn discard_writes(&mut self) {
        self.writes.clear();
        self.events.clear();
    }

    pub fn into_rwset(self) -> ReadWriteSet {
        ReadWriteSet {
            reads: self
                .reads
                .into_iter()
                .map(|(key, version)| KeyRead { key, version })
                .collect(),
            writes: self
                .writes
                .into_iter()
                .map(|(key, op)| KeyWrite { key, op })
                .collect(),
            events: self.events,
        }
    }
}

fn tighter(a: Option<i64>, b: Option<i64>, pick: fn(i64, i64) -> i64) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(pick(x, y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Decodes an argument map into a typed struct.
pub fn parse_args<T: DeserializeOwned>(args: &Value) -> ContractResult<T> {
    serde_json::from_value(args.clone()).map_err(ContractError::bad_args)
}

pub fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("contract response serializes")
}
