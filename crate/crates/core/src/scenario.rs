//! Scripted end-to-end runs of the purchase, delegate and use protocol.
//!
//! A scenario file is a JSON document:
//!
//! ```json
//! {
//!   "name": "single-trip",
//!   "seed": 7,
//!   "start": "2024-02-12T08:00:00Z",
//!   "principals": [{"id": "orgA", "kind": "organisation"}, ...],
//!   "channels": [{"name": "orgA-chan", "organisation": "orgA", "companies": ["companyX"]}],
//!   "accounts": [{"channel": "orgA-chan", "owner": "orgA", "amount": 800}],
//!   "purchases": [{"channel": "orgA-chan", "company": "companyX", "credits": 1000,
//!                  "ask": 500, "bid": 500, "price_list": {"bus": 1}}],
//!   "access": [{"channel": "orgA-chan", "root_conditions": {"kind": "all", "conditions": []}}],
//!   "delegations": [{"action": "delegate", "channel": "orgA-chan", "label": "eng",
//!                    "parent": "root", "grantee": "engineering", ...}],
//!   "trips": [{"channel": "orgA-chan", "trip_id": "t1", "employee": "e1", ...}],
//!   "synthetic": null
//! }
//! ```
//!
//! Times are either integer milliseconds since the Unix epoch or RFC 3339
//! strings. Trips sharing a `batch` number are submitted together and race
//! for the pool; all other trips run one after another.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};

use crate::access::{self, Condition, Decision, GeoPoint, SubLimit, TripRecord, TripRequest, TripStatus};
use crate::contract::Invocation;
use crate::ledger::{Event, LedgerConfig, LedgerError, Network, Principal, PrincipalKind, SimClock, Validity};
use crate::time::{format_time, parse_time, LogicalTime};
use crate::token::{self, Phase, Proposal};

/// Default trip duration between approval and the company's finish.
pub const DEFAULT_TRIP_DURATION_MS: u64 = 20 * 60 * 1000;

/// Logical time spent between consecutive scripted steps.
const STEP_MS: u64 = 1_000;

fn default_start() -> LogicalTime {
    // Monday 2024-02-12T08:00:00Z.
    1_707_724_800_000
}

fn de_time<'de, D: Deserializer<'de>>(d: D) -> Result<LogicalTime, D::Error> {
    match Value::deserialize(d)? {
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| serde::de::Error::custom("time must be a non-negative integer")),
        Value::String(s) => parse_time(&s).ok_or_else(|| serde::de::Error::custom(format!("bad time {s:?}"))),
        other => Err(serde::de::Error::custom(format!("bad time {other}"))),
    }
}

fn de_opt_time<'de, D: Deserializer<'de>>(d: D) -> Result<Option<LogicalTime>, D::Error> {
    de_time(d).map(Some)
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_start", deserialize_with = "de_time")]
    pub start: LogicalTime,
    pub principals: Vec<Principal>,
    pub channels: Vec<ChannelDecl>,
    #[serde(default)]
    pub accounts: Vec<AccountDecl>,
    #[serde(default)]
    pub purchases: Vec<PurchaseDecl>,
    #[serde(default)]
    pub access: Vec<AccessDecl>,
    #[serde(default)]
    pub delegations: Vec<DelegationAction>,
    #[serde(default)]
    pub trips: Vec<TripDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticTrips>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDecl {
    pub name: String,
    pub organisation: String,
    pub companies: Vec<String>,
}

/// Initial settlement-currency balance, minted by the network admin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountDecl {
    pub channel: String,
    pub owner: String,
    pub amount: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurchaseDecl {
    pub channel: String,
    pub company: String,
    pub credits: u64,
    pub ask: u64,
    pub bid: u64,
    pub price_list: BTreeMap<String, u64>,
    /// Tokens the company actually deposits; defaults to `credits`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deposit_tokens: Option<u64>,
    /// Payment the organisation actually deposits; defaults to the agreed
    /// price.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deposit_payment: Option<u64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub payment_first: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessDecl {
    pub channel: String,
    #[serde(default)]
    pub root_conditions: Condition,
}

/// Node references in delegation actions are labels given by earlier
/// `delegate` actions on the same channel, or `"root"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelegationAction {
    Delegate {
        channel: String,
        label: String,
        parent: String,
        grantee: String,
        #[serde(default)]
        conditions: Condition,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sub_limit: Option<SubLimit>,
    },
    Revoke {
        channel: String,
        node: String,
        /// Defaults to the channel's organisation.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        caller: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripDecl {
    pub channel: String,
    pub trip_id: String,
    pub employee: String,
    pub transport_type: String,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    /// Request time; defaults to the scenario clock.
    #[serde(default, deserialize_with = "de_opt_time", skip_serializing_if = "Option::is_none")]
    pub at: Option<LogicalTime>,
    pub max_cost: u64,
    /// Cost reported at finish; defaults to `max_cost`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual_cost: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub company: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<u32>,
}

/// Seeded trips appended after the scripted ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTrips {
    pub channel: String,
    pub count: usize,
    pub employees: Vec<String>,
    pub transport_types: Vec<String>,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub min_cost: u64,
    pub max_cost: u64,
    /// First request time; defaults to just after the scenario start.
    #[serde(default, deserialize_with = "de_opt_time", skip_serializing_if = "Option::is_none")]
    pub start: Option<LogicalTime>,
    /// Trips per concurrent batch; 1 runs them sequentially.
    #[serde(default = "one")]
    pub batch_size: usize,
    /// Logical gap between consecutive request times.
    #[serde(default = "default_gap")]
    pub gap_ms: u64,
}

fn one() -> usize {
    1
}

fn default_gap() -> u64 {
    60_000
}

/// Off-chain result of the negotiation step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationOutcome {
    pub proposal: Proposal,
    pub agreed: bool,
}

/// Deterministic stand-in for off-chain bargaining: the deal closes at the
/// ask price when the bid covers it.
pub fn negotiate(
    company: &str,
    organisation: &str,
    credits: u64,
    price_list: BTreeMap<String, u64>,
    ask: u64,
    bid: u64,
) -> NegotiationOutcome {
    NegotiationOutcome {
        proposal: Proposal {
            company: company.to_string(),
            organisation: organisation.to_string(),
            credit_amount: credits,
            total_price: ask,
            price_list,
        },
        agreed: bid >= ask,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PurchaseOutcome {
    NotAgreed,
    Released,
    RolledBack,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("protocol step failed: {0}")]
    Protocol(String),
}

impl ScenarioError {
    pub fn is_validation(&self) -> bool {
        matches!(self, Self::Parse { .. } | Self::Invalid { .. })
    }

    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// serde_json appends " at line L column C", which the error already carries.
pub fn strip_position(mut message: String) -> String {
    if let Some(i) = message.rfind(" at line ") {
        message.truncate(i);
    }
    message
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: strip_position(e.to_string()),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks that every reference names something declared earlier.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut principals = BTreeMap::new();
        for (i, p) in self.principals.iter().enumerate() {
            let path = format!("principals[{i}]");
            if !p.is_well_formed() {
                return Err(ScenarioError::invalid(path, format!("{} must name its organisation", p.id)));
            }
            if p.kind == PrincipalKind::NetworkAdmin {
                return Err(ScenarioError::invalid(path, "the network admin is implicit"));
            }
            if principals.insert(p.id.as_str(), p).is_some() {
                return Err(ScenarioError::invalid(path, format!("duplicate principal {}", p.id)));
            }
        }
        let kind_is = |id: &str, kind: PrincipalKind| principals.get(id).is_some_and(|p| p.kind == kind);
        let mut channels = BTreeMap::new();
        for (i, c) in self.channels.iter().enumerate() {
            let path = format!("channels[{i}]");
            if !kind_is(&c.organisation, PrincipalKind::Organisation) {
                return Err(ScenarioError::invalid(path, format!("{} is not a declared organisation", c.organisation)));
            }
            if c.companies.is_empty() {
                return Err(ScenarioError::invalid(path, "a channel needs at least one company"));
            }
            if let Some(bad) = c.companies.iter().find(|co| !kind_is(co, PrincipalKind::TransportCompany)) {
                return Err(ScenarioError::invalid(path, format!("{bad} is not a declared transport company")));
            }
            if channels.insert(c.name.as_str(), c).is_some() {
                return Err(ScenarioError::invalid(path, format!("duplicate channel {}", c.name)));
            }
        }
        let channel = |path: String, name: &str| {
            channels
                .get(name)
                .copied()
                .ok_or_else(|| ScenarioError::invalid(path, format!("unknown channel {name}")))
        };
        for (i, a) in self.accounts.iter().enumerate() {
            let path = format!("accounts[{i}]");
            let c = channel(path.clone(), &a.channel)?;
            if a.owner != c.organisation && !c.companies.contains(&a.owner) {
                return Err(ScenarioError::invalid(path, format!("{} is not a member of {}", a.owner, a.channel)));
            }
        }
        for (i, p) in self.purchases.iter().enumerate() {
            let path = format!("purchases[{i}]");
            let c = channel(path.clone(), &p.channel)?;
            if !c.companies.contains(&p.company) {
                return Err(ScenarioError::invalid(path, format!("{} is not on {}", p.company, p.channel)));
            }
            if p.credits == 0 || p.ask == 0 || p.price_list.is_empty() {
                return Err(ScenarioError::invalid(path, "credits, ask and price_list must be non-empty"));
            }
        }
        let mut deployed = BTreeSet::new();
        for (i, a) in self.access.iter().enumerate() {
            let path = format!("access[{i}]");
            channel(path.clone(), &a.channel)?;
            if !deployed.insert(a.channel.as_str()) {
                return Err(ScenarioError::invalid(path, format!("access already deployed on {}", a.channel)));
            }
        }
        let mut labels: BTreeSet<(&str, &str)> = BTreeSet::new();
        for (i, d) in self.delegations.iter().enumerate() {
            let path = format!("delegations[{i}]");
            match d {
                DelegationAction::Delegate {
                    channel: ch,
                    label,
                    parent,
                    grantee,
                    ..
                } => {
                    let c = channel(path.clone(), ch)?;
                    if !deployed.contains(ch.as_str()) {
                        return Err(ScenarioError::invalid(path, format!("no access contract on {ch}")));
                    }
                    if parent != "root" && !labels.contains(&(ch.as_str(), parent.as_str())) {
                        return Err(ScenarioError::invalid(path, format!("unknown parent label {parent}")));
                    }
                    if !principals.get(grantee.as_str()).is_some_and(|p| p.org.as_deref() == Some(&c.organisation)) {
                        return Err(ScenarioError::invalid(path, format!("{grantee} is not a member of {}", c.organisation)));
                    }
                    if label == "root" || !labels.insert((ch.as_str(), label.as_str())) {
                        return Err(ScenarioError::invalid(path, format!("label {label} already used")));
                    }
                }
                DelegationAction::Revoke { channel: ch, node, caller } => {
                    channel(path.clone(), ch)?;
                    if node != "root" && !labels.contains(&(ch.as_str(), node.as_str())) {
                        return Err(ScenarioError::invalid(path, format!("unknown node label {node}")));
                    }
                    if let Some(caller) = caller {
                        if !principals.contains_key(caller.as_str()) {
                            return Err(ScenarioError::invalid(path, format!("unknown principal {caller}")));
                        }
                    }
                }
            }
        }
        let mut trip_ids = BTreeSet::new();
        for (i, t) in self.trips.iter().enumerate() {
            let path = format!("trips[{i}]");
            let c = channel(path.clone(), &t.channel)?;
            if !kind_is(&t.employee, PrincipalKind::Employee) {
                return Err(ScenarioError::invalid(path, format!("{} is not a declared employee", t.employee)));
            }
            if t.max_cost == 0 {
                return Err(ScenarioError::invalid(path, "max_cost must be positive"));
            }
            if let Some(company) = &t.company {
                if !c.companies.contains(company) {
                    return Err(ScenarioError::invalid(path, format!("{company} is not on {}", t.channel)));
                }
            }
            if !trip_ids.insert(t.trip_id.as_str()) {
                return Err(ScenarioError::invalid(path, format!("duplicate trip id {}", t.trip_id)));
            }
        }
        if let Some(s) = &self.synthetic {
            let path = "synthetic".to_string();
            channel(path.clone(), &s.channel)?;
            if s.employees.is_empty() || s.transport_types.is_empty() {
                return Err(ScenarioError::invalid(path, "employees and transport_types must be non-empty"));
            }
            if let Some(bad) = s.employees.iter().find(|e| !kind_is(e, PrincipalKind::Employee)) {
                return Err(ScenarioError::invalid(path, format!("{bad} is not a declared employee")));
            }
            if s.min_cost == 0 || s.min_cost > s.max_cost || s.batch_size == 0 {
                return Err(ScenarioError::invalid(path, "need 0 < min_cost <= max_cost and batch_size > 0"));
            }
        }
        Ok(())
    }

    /// Scripted trips followed by the seeded synthetic ones.
    pub fn all_trips(&self) -> Vec<TripDecl> {
        let mut trips = self.trips.clone();
        let Some(s) = &self.synthetic else {
            return trips;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let first_batch = trips.iter().filter_map(|t| t.batch).max().map_or(0, |b| b + 1);
        let start = s.start.unwrap_or(self.start + STEP_MS);
        for i in 0..s.count {
            let employee = s.employees[rng.gen_range(0..s.employees.len())].clone();
            let transport_type = s.transport_types[rng.gen_range(0..s.transport_types.len())].clone();
            let max_cost = rng.gen_range(s.min_cost..=s.max_cost);
            let actual_cost = rng.gen_range(1..=max_cost);
            trips.push(TripDecl {
                channel: s.channel.clone(),
                trip_id: format!("syn-{i:05}"),
                employee,
                transport_type,
                origin: s.origin,
                destination: s.destination,
                at: Some(start + i as u64 * s.gap_ms),
                max_cost,
                actual_cost: Some(actual_cost),
                company: None,
                duration_ms: None,
                batch: (s.batch_size > 1).then(|| first_batch + (i / s.batch_size) as u32),
            });
        }
        trips
    }
}

/// Drives one purchase through escrow: init, both deposits in the declared
/// order, then checks that every party saw the outcome event.
pub fn run_purchase(
    net: &Network,
    channel: &str,
    decl: &PurchaseDecl,
    clock: &mut SimClock,
) -> Result<(NegotiationOutcome, PurchaseOutcome), ScenarioError> {
    let spec = net.channel_spec(channel)?;
    let outcome = negotiate(
        &decl.company,
        &spec.organisation,
        decl.credits,
        decl.price_list.clone(),
        decl.ask,
        decl.bid,
    );
    if !outcome.agreed {
        return Ok((outcome, PurchaseOutcome::NotAgreed));
    }
    let proposal = &outcome.proposal;
    let company = proposal.company.as_str();
    let org = proposal.organisation.as_str();
    clock.advance(STEP_MS);
    expect_ok(net.submit_and_commit(channel, company, token::calls::init(proposal), clock)?, "init")?;

    let tokens = (company, token::calls::deposit_tokens(company, decl.deposit_tokens.unwrap_or(proposal.credit_amount)));
    let payment = (org, token::calls::deposit_payment(company, decl.deposit_payment.unwrap_or(proposal.total_price)));
    let order = if decl.payment_first { [payment, tokens] } else { [tokens, payment] };
    let events_before = net.events(channel)?.len();
    for (submitter, invocation) in order {
        clock.advance(STEP_MS);
        let op = invocation.operation.clone();
        expect_ok(net.submit_and_commit(channel, submitter, invocation, clock)?, &op)?;
    }

    let escrow = token::view::escrow(&net.state(channel)?, company)
        .ok_or_else(|| ScenarioError::Protocol(format!("no escrow for {company} on {channel}")))?;
    let (result, event_name) = match escrow.phase {
        Phase::Released => (PurchaseOutcome::Released, "token-released"),
        Phase::RolledBack => (PurchaseOutcome::RolledBack, "escrow-rolled-back"),
        other => return Err(ScenarioError::Protocol(format!("escrow stuck in {}", other.label()))),
    };
    let events = net.events(channel)?;
    let confirmation = events[events_before..]
        .iter()
        .find(|e| e.name == event_name)
        .ok_or_else(|| ScenarioError::Protocol(format!("missing {event_name} event")))?;
    for party in [company, org] {
        if !confirmation.is_addressed_to(party) {
            return Err(ScenarioError::Protocol(format!("{event_name} not delivered to {party}")));
        }
    }
    Ok((outcome, result))
}

fn expect_ok(outcome: crate::ledger::TxOutcome, what: &str) -> Result<Value, ScenarioError> {
    match (&outcome.error, outcome.validity) {
        (None, Validity::Valid) => Ok(outcome.response),
        (Some(code), _) => Err(ScenarioError::Protocol(format!("{what} failed: {code}"))),
        (None, v) => Err(ScenarioError::Protocol(format!("{what} invalidated: {v:?}"))),
    }
}

fn request_of(decl: &TripDecl, now: LogicalTime) -> TripRequest {
    TripRequest {
        trip_id: decl.trip_id.clone(),
        employee: decl.employee.clone(),
        transport_type: decl.transport_type.clone(),
        origin: decl.origin,
        destination: decl.destination,
        requested_at: decl.at.unwrap_or(now),
        max_cost: decl.max_cost,
        company: decl.company.clone(),
    }
}

fn denied_record(trip: TripRequest, reason: String) -> TripRecord {
    TripRecord {
        trip,
        status: TripStatus::Denied,
        hold_id: None,
        decision_reason: reason,
        actual_cost: None,
        node_id: None,
        company: None,
        counters: Vec::new(),
    }
}

/// Outcome of a request transaction, from the submitting client's view.
fn decision_of(trip: &TripRequest, outcome: &crate::ledger::TxOutcome) -> Result<Decision, ScenarioError> {
    match (&outcome.error, outcome.validity) {
        (None, Validity::Valid) => serde_json::from_value(outcome.response.clone())
            .map_err(|e| ScenarioError::Protocol(format!("bad decision for {}: {e}", trip.trip_id))),
        (Some(code), _) => Ok(Decision::Denied {
            trip_id: trip.trip_id.clone(),
            reason: code.clone(),
        }),
        (None, _) => Ok(Decision::Denied {
            trip_id: trip.trip_id.clone(),
            reason: "mvcc-conflict".to_string(),
        }),
    }
}

/// Request, ride and finish one trip. Denied trips never reach finish.
pub fn run_trip(
    net: &Network,
    channel: &str,
    decl: &TripDecl,
    clock: &mut SimClock,
) -> Result<TripRecord, ScenarioError> {
    let mut records = run_trip_batch(net, channel, std::slice::from_ref(decl), clock)?;
    Ok(records.remove(0))
}

/// Submits every request of the batch before committing, so they race for
/// the pool and the period budgets; conflicts are resubmitted up to the
/// retry limit. Approved trips then finish together.
pub fn run_trip_batch(
    net: &Network,
    channel: &str,
    decls: &[TripDecl],
    clock: &mut SimClock,
) -> Result<Vec<TripRecord>, ScenarioError> {
    let latest = decls.iter().filter_map(|d| d.at).max().unwrap_or(0);
    clock.advance(STEP_MS);
    clock.advance_to(latest);
    let requests: Vec<TripRequest> = decls.iter().map(|d| request_of(d, clock.now())).collect();
    let invocations: Vec<(String, Invocation)> = requests
        .iter()
        .map(|t| (t.employee.clone(), access::calls::request_access(t)))
        .collect();
    let outcomes = submit_concurrently(net, channel, invocations, clock)?;

    let mut records = Vec::with_capacity(decls.len());
    let mut finishes = Vec::new();
    for ((decl, trip), outcome) in decls.iter().zip(requests).zip(&outcomes) {
        match decision_of(&trip, outcome)? {
            Decision::Approved { company, .. } => {
                let actual = decl.actual_cost.unwrap_or(decl.max_cost).min(decl.max_cost);
                finishes.push((records.len(), company.clone(), access::calls::finish_trip(&trip.trip_id, actual)));
                records.push(None);
            }
            Decision::Denied { reason, .. } => records.push(Some(denied_record(trip, reason))),
        }
    }
    if !finishes.is_empty() {
        let ride = decls.iter().map(|d| d.duration_ms.unwrap_or(DEFAULT_TRIP_DURATION_MS)).max().unwrap_or(0);
        clock.advance(ride);
        let invocations = finishes.iter().map(|(_, c, inv)| (c.clone(), inv.clone())).collect();
        let outcomes = submit_concurrently(net, channel, invocations, clock)?;
        for ((slot, _, inv), outcome) in finishes.iter().zip(outcomes) {
            expect_ok(outcome, &format!("finish_trip {}", inv.args["trip_id"]))?;
            let trip_id = inv.args["trip_id"].as_str().unwrap_or_default();
            let record = access::view::trip(&net.state(channel)?, trip_id)
                .ok_or_else(|| ScenarioError::Protocol(format!("trip {trip_id} missing after finish")))?;
            records[*slot] = Some(record);
        }
    }
    Ok(records.into_iter().map(|r| r.expect("every slot filled")).collect())
}

/// Submits all invocations, commits until the queue drains and resubmits
/// mvcc-conflicts, up to the configured retry limit.
pub fn submit_concurrently(
    net: &Network,
    channel: &str,
    invocations: Vec<(String, Invocation)>,
    clock: &mut SimClock,
) -> Result<Vec<crate::ledger::TxOutcome>, ScenarioError> {
    let mut outcomes: Vec<Option<crate::ledger::TxOutcome>> = vec![None; invocations.len()];
    let mut open: Vec<usize> = (0..invocations.len()).collect();
    let mut attempts = 0;
    while !open.is_empty() {
        attempts += 1;
        let mut submitted = Vec::with_capacity(open.len());
        for &i in &open {
            let (submitter, invocation) = &invocations[i];
            submitted.push((i, net.submit(channel, submitter, invocation.clone(), clock)?));
        }
        clock.advance(STEP_MS);
        net.drain(channel, clock)?;
        let mut retry = Vec::new();
        for (i, tx_id) in submitted {
            let record = net
                .transaction(channel, &tx_id)?
                .ok_or_else(|| ScenarioError::Protocol(format!("{tx_id} not committed")))?;
            if record.validity == Validity::MvccConflict && attempts <= net.config().retry_limit {
                retry.push(i);
            }
            outcomes[i] = Some(crate::ledger::TxOutcome {
                tx_id: record.tx_id.clone(),
                validity: record.validity,
                response: record.response.clone(),
                error: record.error.clone(),
                attempts,
            });
        }
        open = retry;
    }
    Ok(outcomes.into_iter().map(|o| o.expect("every invocation committed")).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurchaseReport {
    pub channel: String,
    pub company: String,
    pub agreed: bool,
    pub outcome: PurchaseOutcome,
}

/// Off-chain trip ledger entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripReport {
    pub channel: String,
    pub trip_id: String,
    pub employee: String,
    pub status: TripStatus,
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hold_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub company: Option<String>,
    pub max_cost: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actual_cost: Option<u64>,
    /// The employee's in-app confirmation of a finished ride.
    pub employee_confirmed: bool,
}

impl TripReport {
    fn new(channel: &str, record: &TripRecord) -> Self {
        Self {
            channel: channel.to_string(),
            trip_id: record.trip.trip_id.clone(),
            employee: record.trip.employee.clone(),
            status: record.status,
            reason: record.decision_reason.clone(),
            hold_id: record.hold_id.clone(),
            company: record.company.clone(),
            max_cost: record.trip.max_cost,
            actual_cost: record.actual_cost,
            employee_confirmed: record.status == TripStatus::Finished,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub state_hash: String,
    pub height: u64,
    pub event_counts: BTreeMap<String, usize>,
}

/// Everything a finished run produced. `network` stays available for log
/// export and further inspection.
pub struct ScenarioRun {
    pub network: Network,
    pub clock: SimClock,
    pub setup_hash: String,
    pub purchases: Vec<PurchaseReport>,
    pub trips: Vec<TripReport>,
}

impl ScenarioRun {
    pub fn network_hash(&self) -> String {
        self.network.network_hash()
    }

    /// Events of every channel, channels in name order.
    pub fn event_log(&self) -> Vec<Event> {
        self.network
            .channel_names()
            .iter()
            .flat_map(|c| self.network.events(c).expect("listed channel"))
            .collect()
    }

    pub fn channel_reports(&self) -> BTreeMap<String, ChannelReport> {
        self.network
            .channel_names()
            .into_iter()
            .map(|name| {
                let mut event_counts = BTreeMap::new();
                for e in self.network.events(&name).expect("listed channel") {
                    *event_counts.entry(e.name).or_insert(0) += 1;
                }
                let height = self.network.with_channel(&name, |l| l.height()).expect("listed channel");
                let report = ChannelReport {
                    state_hash: self.network.state_hash(&name).expect("listed channel"),
                    height,
                    event_counts,
                };
                (name, report)
            })
            .collect()
    }

    /// Machine-readable summary.
    pub fn summary(&self, scenario: &Scenario) -> Value {
        let mut outcomes = BTreeMap::new();
        for t in &self.trips {
            let key = match t.status {
                TripStatus::Denied => format!("denied:{}", t.reason),
                other => serde_json::to_value(other).expect("status").as_str().unwrap_or_default().to_string(),
            };
            *outcomes.entry(key).or_insert(0usize) += 1;
        }
        json!({
            "scenario": scenario.name,
            "seed": scenario.seed,
            "network_hash": self.network_hash(),
            "setup_hash": self.setup_hash,
            "finished_at": format_time(self.clock.now()),
            "channels": self.channel_reports(),
            "purchases": self.purchases,
            "trip_outcomes": outcomes,
            "trips": self.trips,
        })
    }
}

/// Sets up principals, channels, accounts, purchases, access contracts and
/// delegations, then runs every trip.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun, ScenarioError> {
    run_scenario_with(scenario, LedgerConfig::default())
}

pub fn run_scenario_with(scenario: &Scenario, config: LedgerConfig) -> Result<ScenarioRun, ScenarioError> {
    scenario.validate()?;
    let admin = config.admin.clone();
    let net = Network::new(config);
    let mut clock = SimClock::new(scenario.start);

    // Organisations first so members can refer to them.
    let mut principals = scenario.principals.clone();
    principals.sort_by_key(|p| p.kind != PrincipalKind::Organisation);
    for p in principals {
        net.register_principal(p, &clock)?;
    }
    for c in &scenario.channels {
        let companies: Vec<&str> = c.companies.iter().map(String::as_str).collect();
        net.create_channel(&c.name, &c.organisation, &companies, &clock)?;
    }
    for a in &scenario.accounts {
        clock.advance(STEP_MS);
        expect_ok(net.submit_and_commit(&a.channel, &admin, token::calls::mint(&a.owner, a.amount), &clock)?, "mint")?;
    }
    let mut purchases = Vec::new();
    for p in &scenario.purchases {
        let (negotiation, outcome) = run_purchase(&net, &p.channel, p, &mut clock)?;
        purchases.push(PurchaseReport {
            channel: p.channel.clone(),
            company: p.company.clone(),
            agreed: negotiation.agreed,
            outcome,
        });
    }
    for a in &scenario.access {
        clock.advance(STEP_MS);
        let org = net.channel_spec(&a.channel)?.organisation;
        expect_ok(net.submit_and_commit(&a.channel, &org, access::calls::deploy(&a.root_conditions), &clock)?, "deploy")?;
    }
    run_delegations(&net, &scenario.delegations, &mut clock)?;
    let setup_hash = net.network_hash();

    let mut trips = Vec::new();
    let all = scenario.all_trips();
    let mut i = 0;
    while i < all.len() {
        let decl = &all[i];
        let mut j = i + 1;
        if decl.batch.is_some() {
            while j < all.len() && all[j].batch == decl.batch && all[j].channel == decl.channel {
                j += 1;
            }
        }
        for record in run_trip_batch(&net, &decl.channel, &all[i..j], &mut clock)? {
            trips.push(TripReport::new(&decl.channel, &record));
        }
        i = j;
    }
    Ok(ScenarioRun {
        network: net,
        clock,
        setup_hash,
        purchases,
        trips,
    })
}

fn run_delegations(net: &Network, actions: &[DelegationAction], clock: &mut SimClock) -> Result<(), ScenarioError> {
    // (channel, label) -> (node id, grantee)
    let mut nodes: BTreeMap<(String, String), (String, String)> = BTreeMap::new();
    let resolve = |nodes: &BTreeMap<(String, String), (String, String)>, channel: &str, label: &str| {
        if label == "root" {
            let org = net.channel_spec(channel)?.organisation;
            return Ok::<_, ScenarioError>((access::ROOT_NODE.to_string(), org));
        }
        Ok(nodes[&(channel.to_string(), label.to_string())].clone())
    };
    for action in actions {
        clock.advance(STEP_MS);
        match action {
            DelegationAction::Delegate {
                channel,
                label,
                parent,
                grantee,
                conditions,
                sub_limit,
            } => {
                let (parent_id, caller) = resolve(&nodes, channel, parent)?;
                let invocation = access::calls::delegate(&parent_id, grantee, conditions, *sub_limit);
                let response = expect_ok(net.submit_and_commit(channel, &caller, invocation, clock)?, "delegate")?;
                let node_id = response["node_id"].as_str().unwrap_or_default().to_string();
                nodes.insert((channel.clone(), label.clone()), (node_id, grantee.clone()));
            }
            DelegationAction::Revoke { channel, node, caller } => {
                let (node_id, _) = resolve(&nodes, channel, node)?;
                let caller = match caller {
                    Some(c) => c.clone(),
                    None => net.channel_spec(channel)?.organisation,
                };
                expect_ok(net.submit_and_commit(channel, &caller, access::calls::revoke(&node_id), clock)?, "revoke")?;
            }
        }
    }
    Ok(())
}

/// Scenario files shipped with the crate.
pub mod fixtures {
    /// Two organisations and two transport companies, one channel each.
    pub const TWO_ORGS: &str = include_str!("../fixtures/two_orgs.json");
    /// Employee sub-limits summing to three times the purchased pool.
    pub const OVER_ALLOCATION: &str = include_str!("../fixtures/over_allocation.json");
    /// One purchase, one delegation chain, one trip.
    pub const SINGLE_TRIP: &str = include_str!("../fixtures/single_trip.json");
    /// The single-trip script with a short token deposit.
    pub const ROLLBACK: &str = include_str!("../fixtures/rollback.json");

    pub fn all() -> [(&'static str, &'static str); 4] {
        [
            ("two_orgs", TWO_ORGS),
            ("over_allocation", OVER_ALLOCATION),
            ("single_trip", SINGLE_TRIP),
            ("rollback", ROLLBACK),
        ]
    }
}
