use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, RwLock};

use serde_json::{json, Value};

use super::block::Block;
use super::channel::ChannelLedger;
use super::types::{ChannelSpec, Event, Principal, PrincipalKind, TransactionRecord, Validity};
use super::{LedgerConfig, LedgerError, SimClock, WorldState};
use crate::access::AccessContract;
use crate::contract::{Contract, ContractSet, Directory, Invocation};
use crate::registry::{self, RegistryContract};
use crate::token::TokenContract;

/// Name of the base network ledger every principal can see.
pub const BASE_CHANNEL: &str = "transport-chain";

/// Result of a submit-and-wait round trip through the client layer.
#[derive(Clone, Debug, PartialEq)]
pub struct TxOutcome {
    pub tx_id: String,
    pub validity: Validity,
    pub response: Value,
    pub error: Option<String>,
    /// Submissions made, including the first.
    pub attempts: u32,
}

impl TxOutcome {
    pub fn is_valid(&self) -> bool {
        self.validity == Validity::Valid
    }

    fn from_record(record: &TransactionRecord, attempts: u32) -> Self {
        Self {
            tx_id: record.tx_id.clone(),
            validity: record.validity,
            response: record.response.clone(),
            error: record.error.clone(),
            attempts,
        }
    }
}

type SharedLedger = Arc<Mutex<ChannelLedger>>;

/// The whole simulated network: base ledger, channel ledgers and the
/// principal directory derived from the base ledger.
///
/// Every entry point takes `&self`. Ordering and commit are serialized per
/// channel; distinct channels proceed independently.
pub struct Network {
    config: LedgerConfig,
    base: SharedLedger,
    channels: RwLock<BTreeMap<String, SharedLedger>>,
    directory: RwLock<Arc<Directory>>,
}

fn channel_contracts() -> ContractSet {
    let mut set: ContractSet = BTreeMap::new();
    let token: Arc<dyn Contract> = Arc::new(TokenContract);
    let access: Arc<dyn Contract> = Arc::new(AccessContract);
    set.insert(token.name().to_string(), token);
    set.insert(access.name().to_string(), access);
    set
}

fn base_contracts() -> ContractSet {
    let registry: Arc<dyn Contract> = Arc::new(RegistryContract);
    BTreeMap::from([(registry.name().to_string(), registry)])
}

fn base_spec(admin: &str) -> ChannelSpec {
    ChannelSpec {
        name: BASE_CHANNEL.to_string(),
        organisation: admin.to_string(),
        companies: BTreeSet::new(),
    }
}

fn lock(ledger: &SharedLedger) -> std::sync::MutexGuard<'_, ChannelLedger> {
    ledger.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl Network {
    /// Creates the base ledger and registers the network admin in block 1.
    pub fn new(config: LedgerConfig) -> Self {
        let net = Self::empty(config);
        let admin = Principal::new(net.config.admin.clone(), PrincipalKind::NetworkAdmin);
        net.register_principal(admin, &SimClock::default())
            .expect("admin registration on an empty network");
        net
    }

    fn empty(config: LedgerConfig) -> Self {
        let base = ChannelLedger::new(base_spec(&config.admin), base_contracts());
        Self {
            base: Arc::new(Mutex::new(base)),
            channels: RwLock::new(BTreeMap::new()),
            directory: RwLock::new(Arc::new(Directory::default())),
            config,
        }
    }

    /// Rebuilds a network from its base log and channel logs. Channels are
    /// recreated from the registrations recorded on the base ledger.
    pub fn from_logs(
        config: LedgerConfig,
        base_blocks: Vec<Block>,
        mut channel_blocks: BTreeMap<String, Vec<Block>>,
    ) -> Result<Self, LedgerError> {
        let base = ChannelLedger::from_blocks(base_spec(&config.admin), base_contracts(), base_blocks)?;
        let directory = registry::directory_from_state(base.state());
        let specs = registry::channels_from_state(base.state());
        let mut channels = BTreeMap::new();
        for spec in specs {
            let blocks = channel_blocks
                .remove(&spec.name)
                .ok_or_else(|| LedgerError::UnknownChannel(spec.name.clone()))?;
            let name = spec.name.clone();
            let ledger = ChannelLedger::from_blocks(spec, channel_contracts(), blocks)?;
            channels.insert(name, Arc::new(Mutex::new(ledger)));
        }
        if let Some(extra) = channel_blocks.into_keys().next() {
            return Err(LedgerError::UnknownChannel(extra));
        }
        Ok(Self {
            config,
            base: Arc::new(Mutex::new(base)),
            channels: RwLock::new(channels),
            directory: RwLock::new(Arc::new(directory)),
        })
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn directory(&self) -> Arc<Directory> {
        self.directory
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .clone()
    }

    fn ledger(&self, channel: &str) -> Result<SharedLedger, LedgerError> {
        if channel == BASE_CHANNEL {
            return Ok(self.base.clone());
        }
        self.channels
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(channel)
            .cloned()
            .ok_or_else(|| LedgerError::UnknownChannel(channel.to_string()))
    }

    /// Runs `f` with exclusive access to one channel ledger.
    pub fn with_channel<T>(&self, channel: &str, f: impl FnOnce(&mut ChannelLedger) -> T) -> Result<T, LedgerError> {
        let ledger = self.ledger(channel)?;
        let mut guard = lock(&ledger);
        Ok(f(&mut guard))
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    pub fn channel_spec(&self, channel: &str) -> Result<ChannelSpec, LedgerError> {
        self.with_channel(channel, |l| l.spec().clone())
    }

    fn base_transaction(&self, operation: &str, args: Value, clock: &SimClock) -> Result<TxOutcome, LedgerError> {
        let outcome = self.submit_and_commit(
            BASE_CHANNEL,
            &self.config.admin.clone(),
            Invocation::new(registry::NAME, operation, args),
            clock,
        )?;
        let base = lock(&self.base);
        let refreshed = registry::directory_from_state(base.state());
        *self.directory.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(refreshed);
        Ok(outcome)
    }

    /// Records a principal on the base ledger.
    pub fn register_principal(&self, principal: Principal, clock: &SimClock) -> Result<(), LedgerError> {
        let dir = self.directory();
        if !principal.is_well_formed() {
            return Err(LedgerError::WrongPrincipalKind(format!(
                "{} must name its organisation",
                principal.id
            )));
        }
        if dir.contains(&principal.id) {
            return Err(LedgerError::DuplicatePrincipal(principal.id));
        }
        if let Some(org) = &principal.org {
            match dir.get(org) {
                Some(p) if p.kind == PrincipalKind::Organisation => {}
                Some(_) => return Err(LedgerError::WrongPrincipalKind(format!("{org} is not an organisation"))),
                None => return Err(LedgerError::UnknownPrincipal(org.clone())),
            }
        }
        let outcome = self.base_transaction("register_principal", json!({ "principal": principal }), clock)?;
        expect_valid(outcome)
    }

    /// Creates a channel for `organisation` and `companies` and records it on
    /// the base ledger. The new ledger starts at height 0 with a genesis
    /// block.
    pub fn create_channel(
        &self,
        name: &str,
        organisation: &str,
        companies: &[&str],
        clock: &SimClock,
    ) -> Result<ChannelSpec, LedgerError> {
        let dir = self.directory();
        let kind_of = |id: &str| {
            dir.get(id)
                .map(|p| p.kind)
                .ok_or_else(|| LedgerError::UnknownPrincipal(id.to_string()))
        };
        if kind_of(organisation)? != PrincipalKind::Organisation {
            return Err(LedgerError::WrongPrincipalKind(format!("{organisation} is not an organisation")));
        }
        if companies.is_empty() {
            return Err(LedgerError::WrongPrincipalKind(
                "a channel needs at least one transport company".into(),
            ));
        }
        for company in companies {
            if kind_of(company)? != PrincipalKind::TransportCompany {
                return Err(LedgerError::WrongPrincipalKind(format!("{company} is not a transport company")));
            }
        }
        let mut channels = self.channels.write().unwrap_or_else(|p| p.into_inner());
        if name == BASE_CHANNEL || channels.contains_key(name) {
            return Err(LedgerError::DuplicateChannelName(name.to_string()));
        }
        let spec = ChannelSpec {
            name: name.to_string(),
            organisation: organisation.to_string(),
            companies: companies.iter().map(|c| c.to_string()).collect(),
        };
        let outcome = self.base_transaction("register_channel", json!({ "channel": spec }), clock)?;
        expect_valid(outcome)?;
        channels.insert(
            name.to_string(),
            Arc::new(Mutex::new(ChannelLedger::new(spec.clone(), channel_contracts()))),
        );
        Ok(spec)
    }

    fn check_submitter(&self, spec: &ChannelSpec, submitter: &str, dir: &Directory) -> Result<(), LedgerError> {
        if spec.name == BASE_CHANNEL {
            return if submitter == self.config.admin {
                Ok(())
            } else {
                Err(LedgerError::NonMemberSubmitter {
                    submitter: submitter.to_string(),
                    channel: spec.name.clone(),
                })
            };
        }
        let principal = dir
            .get(submitter)
            .ok_or_else(|| LedgerError::UnknownPrincipal(submitter.to_string()))?;
        let allowed = spec.is_member(submitter)
            || dir.belongs_to(submitter, &spec.organisation)
            || principal.kind == PrincipalKind::NetworkAdmin;
        if allowed {
            Ok(())
        } else {
            Err(LedgerError::NonMemberSubmitter {
                submitter: submitter.to_string(),
                channel: spec.name.clone(),
            })
        }
    }

    /// Executes `invocation` against the committed state and queues it.
    /// Returns immediately; the outcome is decided by a later commit.
    pub fn submit(
        &self,
        channel: &str,
        submitter: &str,
        invocation: Invocation,
        clock: &SimClock,
    ) -> Result<String, LedgerError> {
        let dir = self.directory();
        let ledger = self.ledger(channel)?;
        let mut guard = lock(&ledger);
        if !guard.has_contract(&invocation.contract) {
            return Err(LedgerError::UnknownContract(invocation.contract));
        }
        self.check_submitter(guard.spec(), submitter, &dir)?;
        guard.submit(&dir, submitter, invocation, clock.now())
    }

    /// Commits one block of at most `block_size` pending transactions.
    pub fn commit_block(&self, channel: &str, clock: &SimClock) -> Result<Option<Block>, LedgerError> {
        self.commit_block_limited(channel, self.config.block_size, clock)
    }

    /// Commits one block of at most `limit` (capped at `block_size`) pending
    /// transactions.
    pub fn commit_block_limited(
        &self,
        channel: &str,
        limit: usize,
        clock: &SimClock,
    ) -> Result<Option<Block>, LedgerError> {
        let limit = limit.min(self.config.block_size);
        self.with_channel(channel, |l| l.commit_block(limit, clock.now()).cloned())
    }

    /// Commits blocks until the pending queue is empty.
    pub fn drain(&self, channel: &str, clock: &SimClock) -> Result<Vec<Block>, LedgerError> {
        let mut blocks = Vec::new();
        while let Some(block) = self.commit_block(channel, clock)? {
            blocks.push(block);
        }
        Ok(blocks)
    }

    /// Committed value of a fully namespaced key.
    pub fn query(&self, channel: &str, key: &str) -> Result<Vec<u8>, LedgerError> {
        self.with_channel(channel, |l| l.state().get(key).map(|v| v.value.clone()))?
            .ok_or_else(|| LedgerError::UnknownKey(key.to_string()))
    }

    /// Read-only contract call against the committed state. Nothing is
    /// queued; the contract performs its own viewer checks.
    pub fn evaluate(
        &self,
        channel: &str,
        viewer: &str,
        invocation: &Invocation,
        clock: &SimClock,
    ) -> Result<Value, LedgerError> {
        let dir = self.directory();
        self.with_channel(channel, |l| {
            let (_, result) = l.execute(&dir, viewer, "query", invocation, clock.now())?;
            result.map_err(LedgerError::from)
        })?
    }

    pub fn transaction(&self, channel: &str, tx_id: &str) -> Result<Option<TransactionRecord>, LedgerError> {
        self.with_channel(channel, |l| l.committed(tx_id).cloned())
    }

    pub fn state(&self, channel: &str) -> Result<WorldState, LedgerError> {
        self.with_channel(channel, |l| l.state().clone())
    }

    pub fn state_hash(&self, channel: &str) -> Result<String, LedgerError> {
        self.with_channel(channel, |l| l.state().state_hash_hex())
    }

    pub fn blocks(&self, channel: &str) -> Result<Vec<Block>, LedgerError> {
        self.with_channel(channel, |l| l.blocks().to_vec())
    }

    pub fn events(&self, channel: &str) -> Result<Vec<Event>, LedgerError> {
        self.with_channel(channel, |l| l.events().to_vec())
    }

    /// Client-side round trip: submit, commit until the transaction lands,
    /// and resubmit on mvcc-conflict up to `retry_limit` times.
    pub fn submit_and_commit(
        &self,
        channel: &str,
        submitter: &str,
        invocation: Invocation,
        clock: &SimClock,
    ) -> Result<TxOutcome, LedgerError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let tx_id = self.submit(channel, submitter, invocation.clone(), clock)?;
            let record = self.wait_for(channel, &tx_id, clock)?;
            if record.validity != Validity::MvccConflict || attempts > self.config.retry_limit {
                return Ok(TxOutcome::from_record(&record, attempts));
            }
        }
    }

    /// Commits blocks until `tx_id` is committed.
    pub fn wait_for(&self, channel: &str, tx_id: &str, clock: &SimClock) -> Result<TransactionRecord, LedgerError> {
        loop {
            if let Some(record) = self.transaction(channel, tx_id)? {
                return Ok(record);
            }
            if self.commit_block(channel, clock)?.is_none() {
                return Err(LedgerError::UnknownTransaction(tx_id.to_string()));
            }
        }
    }

    /// Combined digest over every ledger's state hash, base ledger first.
    pub fn network_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        let base = lock(&self.base).state().state_hash_hex();
        hasher.update(BASE_CHANNEL.as_bytes());
        hasher.update(base.as_bytes());
        for name in self.channel_names() {
            let hash = self.state_hash(&name).expect("listed channel exists");
            hasher.update(name.as_bytes());
            hasher.update(hash.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

fn expect_valid(outcome: TxOutcome) -> Result<(), LedgerError> {
    match outcome.error {
        Some(code) => Err(LedgerError::Contract(crate::contract::ContractError::new(
            code,
            "registry rejected the transaction",
        ))),
        None if outcome.is_valid() => Ok(()),
        None => Err(LedgerError::Contract(crate::contract::ContractError::new(
            "mvcc-conflict",
            "registry transaction invalidated",
        ))),
    }
}
