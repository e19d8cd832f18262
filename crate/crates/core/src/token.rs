//! Token contract: escrowed purchase of transport credits, the per-company
//! credit pool, holds at access time and settlement at trip end.
//!
//! Escrow lifecycle for one (channel, company) instance:
//!
//! ```text
//! initialized ──tokens──▶ tokens-deposited ──payment──┐
//!      │                                               ├─▶ released | rolled-back
//!      └──────payment──▶ payment-deposited ──tokens───┘
//! ```
//!
//! Once both deposits are present the release check runs inside the same
//! transaction: amounts matching the proposal release the credits into the
//! pool and pay the company; anything else refunds the organisation and
//! destroys the tokens. A terminal instance can be replaced by a new `init`.
//!
//! Pool, held and spent totals are written as guarded increments so that
//! concurrent holds never conflict on a read version, while the `min: 0`
//! guard on the pool keeps over-draw impossible.
//!
//! Event payloads (field names are fixed):
//! * `token-released`: company, organisation, escrow, credits, price, recipients
//! * `escrow-rolled-back`: company, organisation, escrow, tokens, payment, recipients
//! * `hold-created`: hold_id, trip_id, employee, company, amount, recipients
//! * `trip-settled`: hold_id, trip_id, employee, company, actual, refund, recipients

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::contract::{parse_args, to_value, Contract, ContractError, ContractResult, TxContext};
use crate::ledger::state::decode_int;
use crate::ledger::{PrincipalKind, WorldState};

pub const NAME: &str = "token";

/// Negotiated terms of one credit purchase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub company: String,
    pub organisation: String,
    pub credit_amount: u64,
    pub total_price: u64,
    /// Credits per trip unit, by transport type.
    pub price_list: BTreeMap<String, u64>,
}

impl Proposal {
    pub fn validate(&self) -> Result<(), TokenError> {
        if self.credit_amount == 0 {
            return Err(TokenError::InvalidProposal("credit amount must be positive"));
        }
        if self.total_price == 0 {
            return Err(TokenError::InvalidProposal("total price must be positive"));
        }
        if self.price_list.is_empty() {
            return Err(TokenError::InvalidProposal("price list is empty"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Initialized,
    TokensDeposited,
    PaymentDeposited,
    Released,
    RolledBack,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Released | Phase::RolledBack)
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::Initialized => "initialized",
            Phase::TokensDeposited => "tokens-deposited",
            Phase::PaymentDeposited => "payment-deposited",
            Phase::Released => "released",
            Phase::RolledBack => "rolled-back",
        }
    }
}

/// One escrow instance. Escrowed amounts drop to zero once terminal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Escrow {
    pub seq: u64,
    pub proposal: Proposal,
    pub phase: Phase,
    pub escrowed_tokens: u64,
    pub escrowed_payment: u64,
}

/// Identifies the escrow instance `seq` of `company` on a channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowHandle {
    pub company: String,
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hold {
    pub hold_id: String,
    pub trip_id: String,
    pub employee: String,
    pub company: String,
    pub max_amount: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    pub hold_id: String,
    pub trip_id: String,
    pub employee: String,
    pub company: String,
    pub max_amount: u64,
    pub actual_amount: u64,
    pub refund: u64,
}

/// `(pool-available, Σ holds, spent)` plus the total credited by releases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolBalance {
    pub pool_available: u64,
    pub held: u64,
    pub spent: u64,
    pub credited: u64,
}

impl PoolBalance {
    pub fn is_conserved(&self) -> bool {
        self.credited == self.pool_available + self.held + self.spent
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("only the proposal's company may do this")]
    CallerNotCompany,
    #[error("an escrow with this company is still active")]
    ActiveEscrowExists,
    #[error("invalid proposal: {0}")]
    InvalidProposal(&'static str),
    #[error("operation not allowed in phase {}", .0.label())]
    WrongPhase(Phase),
    #[error("caller is not allowed to perform this operation")]
    WrongCaller,
    #[error("balance {balance} below {needed}")]
    InsufficientFunds { balance: u64, needed: u64 },
    #[error("no escrow with {0}")]
    NoEscrow(String),
    #[error("pool holds {available}, requested {requested}")]
    InsufficientPool { available: u64, requested: u64 },
    #[error("no released credit pool on this channel")]
    NoReleasedPool,
    #[error("transport type {0} is not in any released price list")]
    UnknownTransportType(String),
    #[error("trip {0} already has a hold")]
    DuplicateTripId(String),
    #[error("unknown hold {0}")]
    UnknownHold(String),
    #[error("actual {actual} exceeds held {held}")]
    OverHoldAmount { actual: u64, held: u64 },
    #[error("viewer is not authorized")]
    NotAuthorized,
}

impl TokenError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::CallerNotCompany => "caller-not-company",
            Self::ActiveEscrowExists => "active-escrow-exists",
            Self::InvalidProposal(_) => "invalid-proposal",
            Self::WrongPhase(_) => "wrong-phase",
            Self::WrongCaller => "wrong-caller",
            Self::InsufficientFunds { .. } => "insufficient-funds",
            Self::NoEscrow(_) => "no-escrow",
            Self::InsufficientPool { .. } => "insufficient-pool",
            Self::NoReleasedPool => "no-released-pool",
            Self::UnknownTransportType(_) => "unknown-transport-type",
            Self::DuplicateTripId(_) => "duplicate-trip-id",
            Self::UnknownHold(_) => "unknown-hold",
            Self::OverHoldAmount { .. } => "over-hold-amount",
            Self::NotAuthorized => "not-authorized",
        }
    }
}

impl From<TokenError> for ContractError {
    fn from(e: TokenError) -> Self {
        ContractError::new(e.code(), e.to_string())
    }
}

pub fn hold_id_for(trip_id: &str) -> String {
    format!("hold-{trip_id}")
}

mod keys {
    pub fn account(owner: &str) -> String {
        format!("account/{owner}")
    }
    pub const MINTED: &str = "minted";
    pub fn current(company: &str) -> String {
        format!("escrow/{company}/current")
    }
    pub fn escrow(company: &str, seq: u64) -> String {
        format!("escrow/{company}/{seq}")
    }
    pub fn available(company: &str) -> String {
        format!("pool/{company}/available")
    }
    pub fn held(company: &str) -> String {
        format!("pool/{company}/held")
    }
    pub fn spent(company: &str) -> String {
        format!("pool/{company}/spent")
    }
    pub fn credited(company: &str) -> String {
        format!("pool/{company}/credited")
    }
    pub fn prices(company: &str) -> String {
        format!("pool/{company}/prices")
    }
    pub fn hold(hold_id: &str) -> String {
        format!("hold/{hold_id}")
    }
    pub fn settlement(hold_id: &str) -> String {
        format!("settlement/{hold_id}")
    }
}

pub struct TokenContract;

#[derive(Deserialize)]
struct MintArgs {
    owner: String,
    amount: u64,
}

#[derive(Deserialize)]
struct InitArgs {
    proposal: Proposal,
}

#[derive(Deserialize)]
struct DepositArgs {
    company: String,
    amount: u64,
}

#[derive(Deserialize)]
struct CompanyArgs {
    company: String,
}

#[derive(Deserialize)]
struct OwnerArgs {
    owner: String,
}

#[derive(Deserialize)]
struct PoolForArgs {
    transport_type: String,
    #[serde(default)]
    company: Option<String>,
}

#[derive(Deserialize)]
struct HoldArgs {
    trip_id: String,
    employee: String,
    transport_type: String,
    #[serde(default)]
    company: Option<String>,
    amount: u64,
}

#[derive(Deserialize)]
struct SettleArgs {
    hold_id: String,
    actual: u64,
}

type TokenResult<T> = Result<T, TokenError>;

fn account_balance(ctx: &mut TxContext<'_>, owner: &str) -> ContractResult<u64> {
    Ok(ctx.get_int(&keys::account(owner))?.max(0) as u64)
}

fn credit_account(ctx: &mut TxContext<'_>, owner: &str, amount: u64) -> ContractResult<()> {
    let balance = account_balance(ctx, owner)?;
    ctx.put_int(&keys::account(owner), (balance + amount) as i64);
    Ok(())
}

fn current_escrow(ctx: &mut TxContext<'_>, company: &str) -> ContractResult<Option<Escrow>> {
    let Some(seq) = ctx.get(&keys::current(company))? else {
        return Ok(None);
    };
    let seq = decode_int(&seq).ok_or_else(|| ContractError::corrupt(&keys::current(company)))?;
    ctx.get_json(&keys::escrow(company, seq as u64))
}

fn load_escrow(ctx: &mut TxContext<'_>, company: &str) -> ContractResult<Escrow> {
    current_escrow(ctx, company)?.ok_or_else(|| TokenError::NoEscrow(company.to_string()).into())
}

fn store_escrow(ctx: &mut TxContext<'_>, escrow: &Escrow) {
    ctx.put_json(&keys::escrow(&escrow.proposal.company, escrow.seq), escrow);
}

impl TokenContract {
    fn mint(ctx: &mut TxContext<'_>, args: MintArgs) -> ContractResult<Value> {
        let is_admin = ctx
            .principal(ctx.submitter)
            .is_some_and(|p| p.kind == PrincipalKind::NetworkAdmin);
        if !is_admin {
            return Err(TokenError::WrongCaller.into());
        }
        credit_account(ctx, &args.owner, args.amount)?;
        let minted = ctx.get_int(keys::MINTED)?;
        ctx.put_int(keys::MINTED, minted + args.amount as i64);
        Ok(json!({ "owner": args.owner, "balance": account_balance(ctx, &args.owner)? }))
    }

    fn init(ctx: &mut TxContext<'_>, proposal: Proposal) -> ContractResult<Value> {
        if ctx.submitter != proposal.company {
            return Err(TokenError::CallerNotCompany.into());
        }
        proposal.validate()?;
        if !ctx.channel.companies.contains(&proposal.company) || ctx.channel.organisation != proposal.organisation {
            return Err(TokenError::WrongCaller.into());
        }
        let seq = match current_escrow(ctx, &proposal.company)? {
            Some(active) if !active.phase.is_terminal() => {
                return Err(TokenError::ActiveEscrowExists.into());
            }
            Some(previous) => previous.seq + 1,
            None => 0,
        };
        let escrow = Escrow {
            seq,
            proposal,
            phase: Phase::Initialized,
            escrowed_tokens: 0,
            escrowed_payment: 0,
        };
        ctx.put_int(&keys::current(&escrow.proposal.company), seq as i64);
        store_escrow(ctx, &escrow);
        Ok(to_value(&EscrowHandle {
            company: escrow.proposal.company.clone(),
            seq,
        }))
    }

    fn deposit_tokens(ctx: &mut TxContext<'_>, args: DepositArgs) -> ContractResult<Value> {
        let mut escrow = load_escrow(ctx, &args.company)?;
        if ctx.submitter != escrow.proposal.company {
            return Err(TokenError::WrongCaller.into());
        }
        escrow.phase = match escrow.phase {
            Phase::Initialized => Phase::TokensDeposited,
            Phase::PaymentDeposited => Phase::PaymentDeposited,
            other => return Err(TokenError::WrongPhase(other).into()),
        };
        escrow.escrowed_tokens = args.amount;
        if escrow.phase == Phase::PaymentDeposited {
            Self::settle_escrow(ctx, &mut escrow)?;
        }
        store_escrow(ctx, &escrow);
        Ok(json!({ "phase": escrow.phase }))
    }

    fn deposit_payment(ctx: &mut TxContext<'_>, args: DepositArgs) -> ContractResult<Value> {
        let mut escrow = load_escrow(ctx, &args.company)?;
        if ctx.submitter != escrow.proposal.organisation {
            return Err(TokenError::WrongCaller.into());
        }
        let both = match escrow.phase {
            Phase::Initialized => false,
            Phase::TokensDeposited => true,
            other => return Err(TokenError::WrongPhase(other).into()),
        };
        let balance = account_balance(ctx, &escrow.proposal.organisation)?;
        if balance < args.amount {
            return Err(TokenError::InsufficientFunds {
                balance,
                needed: args.amount,
            }
            .into());
        }
        ctx.put_int(
            &keys::account(&escrow.proposal.organisation),
            (balance - args.amount) as i64,
        );
        escrow.escrowed_payment = args.amount;
        escrow.phase = Phase::PaymentDeposited;
        if both {
            Self::settle_escrow(ctx, &mut escrow)?;
        }
        store_escrow(ctx, &escrow);
        Ok(json!({ "phase": escrow.phase }))
    }

    fn try_release(ctx: &mut TxContext<'_>, args: CompanyArgs) -> ContractResult<Value> {
        let escrow = load_escrow(ctx, &args.company)?;
        // Both deposits present always settles inside the depositing
        // transaction, so an explicit call only reports the phase.
        Ok(json!({ "phase": escrow.phase }))
    }

    /// Release-or-rollback once both deposits are in.
    fn settle_escrow(ctx: &mut TxContext<'_>, escrow: &mut Escrow) -> ContractResult<()> {
        let p = escrow.proposal.clone();
        let recipients = json!([p.company, p.organisation]);
        if escrow.escrowed_tokens == p.credit_amount && escrow.escrowed_payment == p.total_price {
            credit_account(ctx, &p.company, escrow.escrowed_payment)?;
            ctx.add(&keys::available(&p.company), p.credit_amount as i64, None, None)?;
            ctx.add(&keys::credited(&p.company), p.credit_amount as i64, None, None)?;
            ctx.put_json(&keys::prices(&p.company), &p.price_list);
            escrow.phase = Phase::Released;
            ctx.emit(
                "token-released",
                json!({
                    "company": p.company,
                    "organisation": p.organisation,
                    "escrow": escrow.seq,
                    "credits": p.credit_amount,
                    "price": p.total_price,
                    "recipients": recipients,
                }),
            );
        } else {
            credit_account(ctx, &p.organisation, escrow.escrowed_payment)?;
            escrow.phase = Phase::RolledBack;
            ctx.emit(
                "escrow-rolled-back",
                json!({
                    "company": p.company,
                    "organisation": p.organisation,
                    "escrow": escrow.seq,
                    "tokens": escrow.escrowed_tokens,
                    "payment": escrow.escrowed_payment,
                    "recipients": recipients,
                }),
            );
        }
        escrow.escrowed_tokens = 0;
        escrow.escrowed_payment = 0;
        Ok(())
    }

    /// Picks the company whose released price list covers `transport_type`:
    /// the requested one, or the first by id.
    fn resolve_pool(ctx: &mut TxContext<'_>, transport_type: &str, company: Option<&str>) -> ContractResult<String> {
        let candidates: Vec<String> = match company {
            Some(c) => vec![c.to_string()],
            None => ctx.channel.companies.iter().cloned().collect(),
        };
        let mut any_pool = false;
        for candidate in candidates {
            let prices: Option<BTreeMap<String, u64>> = ctx.get_json(&keys::prices(&candidate))?;
            if let Some(prices) = prices {
                any_pool = true;
                if prices.contains_key(transport_type) {
                    return Ok(candidate);
                }
            }
        }
        Err(if any_pool {
            TokenError::UnknownTransportType(transport_type.to_string())
        } else {
            TokenError::NoReleasedPool
        }
        .into())
    }

    fn pool_for(ctx: &mut TxContext<'_>, args: PoolForArgs) -> ContractResult<Value> {
        let company = Self::resolve_pool(ctx, &args.transport_type, args.company.as_deref())?;
        let available = ctx.peek_int(&keys::available(&company))?;
        Ok(json!({ "company": company, "available": available }))
    }

    fn require_access_contract(ctx: &TxContext<'_>) -> TokenResult<()> {
        if ctx.caller_contract() == Some(crate::access::NAME) {
            Ok(())
        } else {
            Err(TokenError::WrongCaller)
        }
    }

    fn hold(ctx: &mut TxContext<'_>, args: HoldArgs) -> ContractResult<Value> {
        Self::require_access_contract(ctx)?;
        let company = Self::resolve_pool(ctx, &args.transport_type, args.company.as_deref())?;
        let hold_id = hold_id_for(&args.trip_id);
        if ctx.get(&keys::hold(&hold_id))?.is_some() || ctx.get(&keys::settlement(&hold_id))?.is_some() {
            return Err(TokenError::DuplicateTripId(args.trip_id).into());
        }
        let available = ctx.peek_int(&keys::available(&company))?.max(0) as u64;
        if available < args.amount {
            ctx.pin_peeks();
            return Err(TokenError::InsufficientPool {
                available,
                requested: args.amount,
            }
            .into());
        }
        ctx.add(&keys::available(&company), -(args.amount as i64), Some(0), None)?;
        ctx.add(&keys::held(&company), args.amount as i64, None, None)?;
        let hold = Hold {
            hold_id: hold_id.clone(),
            trip_id: args.trip_id,
            employee: args.employee,
            company,
            max_amount: args.amount,
        };
        ctx.put_json(&keys::hold(&hold_id), &hold);
        ctx.emit(
            "hold-created",
            json!({
                "hold_id": hold.hold_id,
                "trip_id": hold.trip_id,
                "employee": hold.employee,
                "company": hold.company,
                "amount": hold.max_amount,
                "recipients": [hold.company],
            }),
        );
        Ok(to_value(&hold))
    }

    fn settle(ctx: &mut TxContext<'_>, args: SettleArgs) -> ContractResult<Value> {
        Self::require_access_contract(ctx)?;
        let hold: Hold = ctx
            .get_json(&keys::hold(&args.hold_id))?
            .ok_or_else(|| TokenError::UnknownHold(args.hold_id.clone()))?;
        if args.actual > hold.max_amount {
            return Err(TokenError::OverHoldAmount {
                actual: args.actual,
                held: hold.max_amount,
            }
            .into());
        }
        let refund = hold.max_amount - args.actual;
        ctx.add(&keys::available(&hold.company), refund as i64, None, None)?;
        ctx.add(&keys::held(&hold.company), -(hold.max_amount as i64), Some(0), None)?;
        ctx.add(&keys::spent(&hold.company), args.actual as i64, None, None)?;
        ctx.delete(&keys::hold(&hold.hold_id));
        let settlement = Settlement {
            hold_id: hold.hold_id,
            trip_id: hold.trip_id,
            employee: hold.employee,
            company: hold.company,
            max_amount: hold.max_amount,
            actual_amount: args.actual,
            refund,
        };
        ctx.put_json(&keys::settlement(&settlement.hold_id), &settlement);
        ctx.emit(
            "trip-settled",
            json!({
                "hold_id": settlement.hold_id,
                "trip_id": settlement.trip_id,
                "employee": settlement.employee,
                "company": settlement.company,
                "actual": settlement.actual_amount,
                "refund": settlement.refund,
                "recipients": [settlement.company, ctx.channel.organisation],
            }),
        );
        Ok(to_value(&settlement))
    }

    fn balance_of(ctx: &mut TxContext<'_>, args: CompanyArgs) -> ContractResult<Value> {
        let viewer = ctx.submitter;
        if !(ctx.channel.is_member(viewer) || ctx.directory.belongs_to(viewer, &ctx.channel.organisation)) {
            return Err(TokenError::NotAuthorized.into());
        }
        let read = |ctx: &mut TxContext<'_>, key: String| -> ContractResult<u64> {
            Ok(ctx.get_int(&key)?.max(0) as u64)
        };
        let balance = PoolBalance {
            pool_available: read(ctx, keys::available(&args.company))?,
            held: read(ctx, keys::held(&args.company))?,
            spent: read(ctx, keys::spent(&args.company))?,
            credited: read(ctx, keys::credited(&args.company))?,
        };
        Ok(to_value(&balance))
    }
}

impl Contract for TokenContract {
    fn name(&self) -> &str {
        NAME
    }

    fn invoke(&self, ctx: &mut TxContext<'_>, operation: &str, args: &Value) -> ContractResult<Value> {
        match operation {
            "mint" => Self::mint(ctx, parse_args(args)?),
            "init" => {
                let InitArgs { proposal } = parse_args(args)?;
                Self::init(ctx, proposal)
            }
            "deposit_tokens" => Self::deposit_tokens(ctx, parse_args(args)?),
            "deposit_payment" => Self::deposit_payment(ctx, parse_args(args)?),
            "try_release" => Self::try_release(ctx, parse_args(args)?),
            "pool_for" => Self::pool_for(ctx, parse_args(args)?),
            "hold" => Self::hold(ctx, parse_args(args)?),
            "settle" => Self::settle(ctx, parse_args(args)?),
            "balance_of" => Self::balance_of(ctx, parse_args(args)?),
            "escrow" => {
                let CompanyArgs { company } = parse_args(args)?;
                Ok(to_value(&load_escrow(ctx, &company)?))
            }
            "account" => {
                let OwnerArgs { owner } = parse_args(args)?;
                Ok(json!({ "owner": owner, "balance": account_balance(ctx, &owner)? }))
            }
            other => Err(ContractError::new("unknown-operation", other)),
        }
    }
}

/// Invocation builders for clients.
pub mod calls {
    use serde_json::json;

    use super::{Proposal, NAME};
    use crate::contract::Invocation;

    pub fn mint(owner: &str, amount: u64) -> Invocation {
        Invocation::new(NAME, "mint", json!({ "owner": owner, "amount": amount }))
    }

    pub fn init(proposal: &Proposal) -> Invocation {
        Invocation::new(NAME, "init", json!({ "proposal": proposal }))
    }

    pub fn deposit_tokens(company: &str, amount: u64) -> Invocation {
        Invocation::new(NAME, "deposit_tokens", json!({ "company": company, "amount": amount }))
    }

    pub fn deposit_payment(company: &str, amount: u64) -> Invocation {
        Invocation::new(NAME, "deposit_payment", json!({ "company": company, "amount": amount }))
    }

    pub fn try_release(company: &str) -> Invocation {
        Invocation::new(NAME, "try_release", json!({ "company": company }))
    }

    pub fn balance_of(company: &str) -> Invocation {
        Invocation::new(NAME, "balance_of", json!({ "company": company }))
    }

    pub fn escrow(company: &str) -> Invocation {
        Invocation::new(NAME, "escrow", json!({ "company": company }))
    }

    pub fn account(owner: &str) -> Invocation {
        Invocation::new(NAME, "account", json!({ "owner": owner }))
    }
}

/// Direct reads of committed token state, for audits and tests.
pub mod view {
    use super::*;

    fn int(state: &WorldState, key: &str) -> i64 {
        state
            .get(&format!("{NAME}/{key}"))
            .and_then(|v| decode_int(&v.value))
            .unwrap_or(0)
    }

    pub fn pool(state: &WorldState, company: &str) -> PoolBalance {
        PoolBalance {
            pool_available: int(state, &keys::available(company)) as u64,
            held: int(state, &keys::held(company)) as u64,
            spent: int(state, &keys::spent(company)) as u64,
            credited: int(state, &keys::credited(company)) as u64,
        }
    }

    /// Raw signed pool value, to detect negative balances.
    pub fn raw_available(state: &WorldState, company: &str) -> i64 {
        int(state, &keys::available(company))
    }

    pub fn account(state: &WorldState, owner: &str) -> u64 {
        int(state, &keys::account(owner)) as u64
    }

    pub fn minted(state: &WorldState) -> u64 {
        int(state, keys::MINTED) as u64
    }

    pub fn escrow(state: &WorldState, company: &str) -> Option<Escrow> {
        let seq = int(state, &keys::current(company));
        state
            .get(&format!("{NAME}/{}", keys::escrow(company, seq as u64)))
            .and_then(|v| serde_json::from_slice(&v.value).ok())
    }

    /// Σ account balances + Σ escrowed payments.
    pub fn total_currency(state: &WorldState) -> u64 {
        let accounts: u64 = state
            .scan(&format!("{NAME}/account/"))
            .filter_map(|(_, v)| decode_int(&v.value))
            .map(|n| n as u64)
            .sum();
        let escrowed: u64 = state
            .scan(&format!("{NAME}/escrow/"))
            .filter_map(|(_, v)| serde_json::from_slice::<Escrow>(&v.value).ok())
            .map(|e| e.escrowed_payment)
            .sum();
        accounts + escrowed
    }

    pub fn holds(state: &WorldState) -> Vec<Hold> {
        state
            .scan(&format!("{NAME}/hold/"))
            .filter_map(|(_, v)| serde_json::from_slice(&v.value).ok())
            .collect()
    }

    pub fn settlements(state: &WorldState) -> Vec<Settlement> {
        state
            .scan(&format!("{NAME}/settlement/"))
            .filter_map(|(_, v)| serde_json::from_slice(&v.value).ok())
            .collect()
    }
}
