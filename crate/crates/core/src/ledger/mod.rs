//! Simulated permissioned ledger: a base network ledger plus one ledger per
//! organisation channel, each running execute → order → validate → commit.
//!
//! * `submit` executes the invocation against the committed state and queues
//!   the resulting read-write set.
//! * `commit_block` orders up to `block_size` queued transactions FIFO and
//!   validates them one by one against the cumulative state: a transaction is
//!   valid iff every key it read still has the version it observed and every
//!   guarded increment stays within bounds. Only valid transactions apply
//!   writes and deliver events.
//! * Blocks are hash-chained and can be exported as JSON lines and replayed.

mod block;
mod channel;
mod network;
pub mod state;
mod types;

use serde::{Deserialize, Serialize};

pub use block::{read_log, verify_chain, write_log, Block, ZERO_HASH};
pub use channel::{replay, replay_with_snapshots, validate_and_apply, ChannelLedger};
pub use network::{Network, TxOutcome, BASE_CHANNEL};
pub use state::{Version, VersionedValue, WorldState};
pub use types::{
    ChannelSpec, Event, KeyRead, KeyWrite, Principal, PrincipalKind, ReadWriteSet,
    TransactionRecord, Validity, WriteOp,
};

use crate::contract::ContractError;
use crate::time::LogicalTime;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerConfig {
    /// Maximum transactions per block.
    pub block_size: usize,
    /// Resubmissions after an mvcc-conflict before the client gives up.
    pub retry_limit: u32,
    /// Principal id of the network operator.
    pub admin: String,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self {
            block_size: 50,
            retry_limit: 3,
            admin: "network-admin".to_string(),
        }
    }
}

/// Logical clock owned by the simulation driver. Never reads wall time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    now: LogicalTime,
}

impl SimClock {
    pub fn new(now: LogicalTime) -> Self {
        Self { now }
    }

    pub fn now(&self) -> LogicalTime {
        self.now
    }

    pub fn advance(&mut self, ms: LogicalTime) {
        self.now += ms;
    }

    /// Moves forward to `at`; earlier instants are ignored.
    pub fn advance_to(&mut self, at: LogicalTime) {
        self.now = self.now.max(at);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("duplicate channel name {0}")]
    DuplicateChannelName(String),
    #[error("wrong principal kind: {0}")]
    WrongPrincipalKind(String),
    #[error("unknown principal {0}")]
    UnknownPrincipal(String),
    #[error("duplicate principal {0}")]
    DuplicatePrincipal(String),
    #[error("unknown contract {0}")]
    UnknownContract(String),
    #[error("{submitter} is not a member of channel {channel}")]
    NonMemberSubmitter { submitter: String, channel: String },
    #[error("unknown key {0}")]
    UnknownKey(String),
    #[error("unknown transaction {0}")]
    UnknownTransaction(String),
    #[error("broken hash chain at height {height}")]
    BrokenHashChain { height: u64 },
    #[error("malformed block log at line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },
    #[error("replay diverged at transaction {tx_id}")]
    ReplayDivergence { tx_id: String },
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("io error: {0}")]
    Io(String),
}

impl LedgerError {
    /// Stable kebab-case label.
    pub fn code(&self) -> &str {
        match self {
            Self::UnknownChannel(_) => "unknown-channel",
            Self::DuplicateChannelName(_) => "duplicate-channel-name",
            Self::WrongPrincipalKind(_) => "wrong-principal-kind",
            Self::UnknownPrincipal(_) => "unknown-principal",
            Self::DuplicatePrincipal(_) => "duplicate-principal",
            Self::UnknownContract(_) => "unknown-contract",
            Self::NonMemberSubmitter { .. } => "non-member-submitter",
            Self::UnknownKey(_) => "unknown-key",
            Self::UnknownTransaction(_) => "unknown-transaction",
            Self::BrokenHashChain { .. } => "broken-hash-chain",
            Self::MalformedLog { .. } => "malformed-log",
            Self::ReplayDivergence { .. } => "replay-divergence",
            Self::Contract(e) => &e.code,
            Self::Io(_) => "io-error",
        }
    }
}

impl From<std::io::Error> for LedgerError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
