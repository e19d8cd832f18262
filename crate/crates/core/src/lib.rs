//! Deterministic, single-process simulator of a permissioned transport-credit
//! network.
//!
//! Each organisation runs its own channel ledger shared with the transport
//! companies it buys from. Two contracts are installed on every channel:
//!
//! * [`token`]: escrowed purchase of transport credits, the organisation's
//!   credit pool, holds at access time and settlement at trip end.
//! * [`access`]: the organisation's delegation tree with conjunctive
//!   conditions, `request_access` and `finish_trip`.
//!
//! [`ledger`] provides the execute, order, validate, commit pipeline with MVCC
//! read-set validation, hash-chained blocks and replay. [`scenario`] drives
//! the full purchase, delegate and use protocol from a JSON script, and
//! [`bench`] measures throughput and latency of the trip transactions against
//! a committer of configurable capacity.

pub mod access;
pub mod bench;
pub mod contract;
pub mod ledger;
pub mod registry;
pub mod scenario;
pub mod store;
pub mod time;
pub mod token;

pub use contract::{Contract, ContractError, Invocation, TxContext};
pub use ledger::{
    Block, ChannelSpec, Event, LedgerConfig, LedgerError, Network, Principal, PrincipalKind,
    SimClock, TransactionRecord, Validity, WorldState,
};
