use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::condition::{conjunction, Condition, GeoPoint, TripContext};
use crate::contract::{parse_args, to_value, Contract, ContractError, ContractResult, TxContext};
use crate::ledger::PrincipalKind;
use crate::time::{period_key, LogicalTime, Period};
use crate::token;

pub const NAME: &str = "access";
pub const ROOT_NODE: &str = "n0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubLimit {
    pub credits: u64,
    pub period: Period,
}

/// One delegation edge from `grantor` to `grantee`. The grantee's rights are
/// the conjunction of `added_conditions` along the path from the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelegationNode {
    pub node_id: String,
    pub grantor: String,
    pub grantee: String,
    pub parent: Option<String>,
    pub added_conditions: Condition,
    pub sub_limit: Option<SubLimit>,
    pub revoked: bool,
    pub children: BTreeSet<String>,
}

impl DelegationNode {
    /// Spending bounds attached to this node, by period.
    pub fn bounds(&self) -> BTreeMap<Period, u64> {
        let mut bounds = BTreeMap::new();
        let all = self
            .sub_limit
            .iter()
            .map(|s| (s.period, s.credits))
            .chain(self.added_conditions.budgets());
        for (period, credits) in all {
            bounds
                .entry(period)
                .and_modify(|b: &mut u64| *b = (*b).min(credits))
                .or_insert(credits);
        }
        bounds
    }
}

/// Effective condition of the last node in a root-to-node path.
pub fn effective_condition(path: &[DelegationNode]) -> Condition {
    conjunction(path.iter().map(|n| &n.added_conditions))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRequest {
    pub trip_id: String,
    pub employee: String,
    pub transport_type: String,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub requested_at: LogicalTime,
    pub max_cost: u64,
    /// Pool to hold against; resolved from the transport type when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub company: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripStatus {
    Approved,
    Denied,
    Finished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub trip: TripRequest,
    pub status: TripStatus,
    pub hold_id: Option<String>,
    pub decision_reason: String,
    pub actual_cost: Option<u64>,
    pub node_id: Option<String>,
    pub company: Option<String>,
    /// Period counters (`node/period-key`) charged by this trip.
    #[serde(default)]
    pub counters: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenialReason {
    NoDelegation,
    Revoked,
    ConditionFailed(String),
    BudgetExceeded,
    InsufficientPool,
    DuplicateTrip,
}

impl fmt::Display for DenialReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoDelegation => f.write_str("no-delegation"),
            Self::Revoked => f.write_str("revoked"),
            Self::ConditionFailed(which) => write!(f, "condition-failed:{which}"),
            Self::BudgetExceeded => f.write_str("budget-exceeded"),
            Self::InsufficientPool => f.write_str("insufficient-pool"),
            Self::DuplicateTrip => f.write_str("duplicate-trip"),
        }
    }
}

/// Outcome of `request_access`. A denial is a normal, committed result.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "kebab-case")]
pub enum Decision {
    Approved {
        trip_id: String,
        hold_id: String,
        node_id: String,
        company: String,
    },
    Denied {
        trip_id: String,
        reason: String,
    },
}

impl Decision {
    pub fn is_approved(&self) -> bool {
        matches!(self, Decision::Approved { .. })
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Approved { hold_id, .. } => write!(f, "approved hold={hold_id}"),
            Decision::Denied { reason, .. } => write!(f, "denied {reason}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AccessError {
    #[error("access contract already deployed")]
    AlreadyDeployed,
    #[error("access contract not deployed")]
    NotDeployed,
    #[error("caller is not allowed to perform this operation")]
    WrongCaller,
    #[error("caller is not the grantee of node {0}")]
    NotGrantee(String),
    #[error("node {0} is revoked")]
    RevokedParent(String),
    #[error("{0} does not belong to this organisation")]
    ForeignGrantee(String),
    #[error("caller may not revoke node {0}")]
    NotAuthorized(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown trip {0}")]
    UnknownTrip(String),
    #[error("trip {0} already finished")]
    AlreadyFinished(String),
    #[error("invalid trip: {0}")]
    InvalidTrip(String),
}

impl AccessError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::AlreadyDeployed => "already-deployed",
            Self::NotDeployed => "not-deployed",
            Self::WrongCaller => "wrong-caller",
            Self::NotGrantee(_) => "not-grantee",
            Self::RevokedParent(_) => "revoked-parent",
            Self::ForeignGrantee(_) => "foreign-grantee",
            Self::NotAuthorized(_) => "not-authorized",
            Self::UnknownNode(_) => "unknown-node",
            Self::UnknownTrip(_) => "unknown-trip",
            Self::AlreadyFinished(_) => "already-finished",
            Self::InvalidTrip(_) => "invalid-trip",
        }
    }
}

impl From<AccessError> for ContractError {
    fn from(e: AccessError) -> Self {
        ContractError::new(e.code(), e.to_string())
    }
}

mod keys {
    pub const CONFIG: &str = "config";
    pub const NEXT_NODE: &str = "next-node";
    pub fn node(id: &str) -> String {
        format!("node/{id}")
    }
    pub fn grantee(principal: &str) -> String {
        format!("grantee/{principal}")
    }
    pub fn trip(id: &str) -> String {
        format!("trip/{id}")
    }
    /// Reserved plus spent credits for a counter.
    pub fn usage(counter: &str) -> String {
        format!("usage/{counter}")
    }
    pub fn spent(counter: &str) -> String {
        format!("spent/{counter}")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Config {
    organisation: String,
    root: String,
}

#[derive(Deserialize)]
struct DeployArgs {
    #[serde(default)]
    root_conditions: Condition,
}

#[derive(Deserialize)]
struct DelegateArgs {
    parent: String,
    grantee: String,
    #[serde(default)]
    conditions: Condition,
    #[serde(default)]
    sub_limit: Option<SubLimit>,
}

#[derive(Deserialize)]
struct NodeArgs {
    node: String,
}

#[derive(Deserialize)]
struct RequestArgs {
    trip: TripRequest,
}

#[derive(Deserialize)]
struct FinishArgs {
    trip_id: String,
    actual_cost: u64,
}

#[derive(Deserialize)]
struct TripArgs {
    trip_id: String,
}

#[derive(Deserialize)]
struct CheckArgs {
    node: String,
    context: TripContext,
}

pub struct AccessContract;

fn load_node(ctx: &mut TxContext<'_>, id: &str) -> ContractResult<DelegationNode> {
    ctx.get_json(&keys::node(id))?
        .ok_or_else(|| AccessError::UnknownNode(id.to_string()).into())
}

/// Nodes from the root down to `id`.
fn load_path(ctx: &mut TxContext<'_>, id: &str) -> ContractResult<Vec<DelegationNode>> {
    let mut path = vec![load_node(ctx, id)?];
    while let Some(parent) = path.last().and_then(|n| n.parent.clone()) {
        path.push(load_node(ctx, &parent)?);
    }
    path.reverse();
    Ok(path)
}

fn load_config(ctx: &mut TxContext<'_>) -> ContractResult<Config> {
    ctx.get_json(keys::CONFIG)?
        .ok_or_else(|| AccessError::NotDeployed.into())
}

/// Counter ids and the tightest bound for each, over every node on `path`.
fn counters_for(path: &[DelegationNode], at: LogicalTime) -> BTreeMap<String, u64> {
    let mut counters = BTreeMap::new();
    for node in path {
        for (period, bound) in node.bounds() {
            counters.insert(format!("{}/{}", node.node_id, period_key(period, at)), bound);
        }
    }
    counters
}

impl AccessContract {
    fn deploy(ctx: &mut TxContext<'_>, args: DeployArgs) -> ContractResult<Value> {
        let org = ctx.channel.organisation.clone();
        if ctx.submitter != org {
            return Err(AccessError::WrongCaller.into());
        }
        if ctx.get(keys::CONFIG)?.is_some() {
            return Err(AccessError::AlreadyDeployed.into());
        }
        let root = DelegationNode {
            node_id: ROOT_NODE.to_string(),
            grantor: org.clone(),
            grantee: org.clone(),
            parent: None,
            added_conditions: args.root_conditions,
            sub_limit: None,
            revoked: false,
            children: BTreeSet::new(),
        };
        ctx.put_json(&keys::node(ROOT_NODE), &root);
        ctx.put_int(keys::NEXT_NODE, 1);
        ctx.put_json(
            keys::CONFIG,
            &Config {
                organisation: org,
                root: ROOT_NODE.to_string(),
            },
        );
        Ok(json!({ "node_id": ROOT_NODE }))
    }

    fn delegate(ctx: &mut TxContext<'_>, args: DelegateArgs) -> ContractResult<Value> {
        let config = load_config(ctx)?;
        let mut parent = load_node(ctx, &args.parent)?;
        if ctx.submitter != parent.grantee {
            return Err(AccessError::NotGrantee(parent.node_id).into());
        }
        if parent.revoked {
            return Err(AccessError::RevokedParent(parent.node_id).into());
        }
        let member = ctx.principal(&args.grantee).is_some_and(|p| {
            matches!(p.kind, PrincipalKind::Department | PrincipalKind::Employee)
                && p.org.as_deref() == Some(config.organisation.as_str())
        });
        if !member {
            return Err(AccessError::ForeignGrantee(args.grantee).into());
        }
        let seq = ctx.get_int(keys::NEXT_NODE)?;
        ctx.put_int(keys::NEXT_NODE, seq + 1);
        let node_id = format!("n{seq}");
        let node = DelegationNode {
            node_id: node_id.clone(),
            grantor: parent.grantee.clone(),
            grantee: args.grantee.clone(),
            parent: Some(parent.node_id.clone()),
            added_conditions: args.conditions,
            sub_limit: args.sub_limit,
            revoked: false,
            children: BTreeSet::new(),
        };
        parent.children.insert(node_id.clone());
        ctx.put_json(&keys::node(&parent.node_id), &parent);
        ctx.put_json(&keys::node(&node_id), &node);
        let mut granted: Vec<String> = ctx.get_json(&keys::grantee(&args.grantee))?.unwrap_or_default();
        granted.push(node_id.clone());
        ctx.put_json(&keys::grantee(&args.grantee), &granted);
        Ok(json!({ "node_id": node_id }))
    }

    fn revoke(ctx: &mut TxContext<'_>, args: NodeArgs) -> ContractResult<Value> {
        load_config(ctx)?;
        let path = load_path(ctx, &args.node)?;
        let target = path.last().expect("path ends at the node");
        let caller = ctx.submitter;
        let ancestors = &path[..path.len() - 1];
        let authorized = target.grantor == caller || ancestors.iter().any(|n| n.grantee == caller);
        if !authorized {
            return Err(AccessError::NotAuthorized(args.node).into());
        }
        let mut queue = VecDeque::from([args.node.clone()]);
        let mut revoked = Vec::new();
        while let Some(id) = queue.pop_front() {
            let mut node = load_node(ctx, &id)?;
            queue.extend(node.children.iter().cloned());
            if !node.revoked {
                node.revoked = true;
                ctx.put_json(&keys::node(&id), &node);
                revoked.push(id);
            }
        }
        Ok(json!({ "revoked": revoked }))
    }

    fn deny(ctx: &mut TxContext<'_>, trip_id: &str, reason: DenialReason) -> ContractResult<Value> {
        ctx.pin_peeks();
        ctx.discard_writes();
        Ok(to_value(&Decision::Denied {
            trip_id: trip_id.to_string(),
            reason: reason.to_string(),
        }))
    }

    fn request_access(ctx: &mut TxContext<'_>, trip: TripRequest) -> ContractResult<Value> {
        load_config(ctx)?;
        if trip.max_cost == 0 {
            return Err(AccessError::InvalidTrip("max-cost must be positive".into()).into());
        }
        let submitter_ok = ctx.submitter == trip.employee || ctx.channel.companies.contains(ctx.submitter);
        if !submitter_ok {
            return Err(AccessError::WrongCaller.into());
        }
        let trip_id = trip.trip_id.clone();
        if ctx.get(&keys::trip(&trip_id))?.is_some() {
            return Self::deny(ctx, &trip_id, DenialReason::DuplicateTrip);
        }
        let Some(employee) = ctx.principal(&trip.employee) else {
            return Self::deny(ctx, &trip_id, DenialReason::NoDelegation);
        };
        let granted: Vec<String> = ctx.get_json(&keys::grantee(&trip.employee))?.unwrap_or_default();
        if granted.is_empty() {
            return Self::deny(ctx, &trip_id, DenialReason::NoDelegation);
        }
        let mut paths = Vec::new();
        for id in &granted {
            let path = load_path(ctx, id)?;
            if !path.last().expect("non-empty path").revoked {
                paths.push(path);
            }
        }
        if paths.is_empty() {
            return Self::deny(ctx, &trip_id, DenialReason::Revoked);
        }

        // Balance check first, then rules.
        let pool_args = json!({ "transport_type": trip.transport_type, "company": trip.company });
        let pool = match ctx.invoke(token::NAME, "pool_for", &pool_args) {
            Ok(pool) => pool,
            Err(e) if e.code == "no-released-pool" => {
                return Self::deny(ctx, &trip_id, DenialReason::InsufficientPool)
            }
            Err(e) if e.code == "unknown-transport-type" => {
                return Err(AccessError::InvalidTrip(e.detail).into());
            }
            Err(e) => return Err(e),
        };
        let company = pool["company"].as_str().unwrap_or_default().to_string();
        if pool["available"].as_i64().unwrap_or(0) < trip.max_cost as i64 {
            return Self::deny(ctx, &trip_id, DenialReason::InsufficientPool);
        }

        let context = TripContext {
            at: trip.requested_at,
            origin: trip.origin,
            destination: trip.destination,
            transport_type: trip.transport_type.clone(),
            role: employee.role.clone(),
            amount: trip.max_cost,
        };
        let mut first_reason = None;
        let mut chosen = None;
        for path in &paths {
            if let Some(label) = effective_condition(path).first_failure(&context) {
                first_reason.get_or_insert(DenialReason::ConditionFailed(label.to_string()));
                continue;
            }
            let counters = counters_for(path, trip.requested_at);
            let mut within = true;
            for (counter, bound) in &counters {
                let used = ctx.peek_int(&keys::usage(counter))?.max(0) as u64;
                if used + trip.max_cost > *bound {
                    within = false;
                }
            }
            if !within {
                first_reason.get_or_insert(DenialReason::BudgetExceeded);
                continue;
            }
            chosen = Some((path.last().expect("non-empty path").node_id.clone(), counters));
            break;
        }
        let Some((node_id, counters)) = chosen else {
            let reason = first_reason.expect("a candidate path was rejected");
            return Self::deny(ctx, &trip_id, reason);
        };

        let hold_args = json!({
            "trip_id": trip.trip_id,
            "employee": trip.employee,
            "transport_type": trip.transport_type,
            "company": company,
            "amount": trip.max_cost,
        });
        let hold = match ctx.invoke(token::NAME, "hold", &hold_args) {
            Ok(hold) => hold,
            Err(e) if e.code == "insufficient-pool" => {
                return Self::deny(ctx, &trip_id, DenialReason::InsufficientPool)
            }
            Err(e) if e.code == "duplicate-trip-id" => {
                return Self::deny(ctx, &trip_id, DenialReason::DuplicateTrip)
            }
            Err(e) => return Err(e),
        };
        let hold_id = hold["hold_id"].as_str().unwrap_or_default().to_string();
        for (counter, bound) in &counters {
            ctx.add(&keys::usage(counter), trip.max_cost as i64, None, Some(*bound as i64))?;
        }
        let record = TripRecord {
            trip,
            status: TripStatus::Approved,
            hold_id: Some(hold_id.clone()),
            decision_reason: "approved".to_string(),
            actual_cost: None,
            node_id: Some(node_id.clone()),
            company: Some(company.clone()),
            counters: counters.into_keys().collect(),
        };
        ctx.put_json(&keys::trip(&trip_id), &record);
        ctx.emit(
            "trip-approved",
            json!({
                "trip_id": trip_id,
                "employee": record.trip.employee,
                "company": company,
                "hold_id": hold_id,
                "max_cost": record.trip.max_cost,
                "recipients": [company],
            }),
        );
        Ok(to_value(&Decision::Approved {
            trip_id,
            hold_id,
            node_id,
            company,
        }))
    }

    fn finish_trip(ctx: &mut TxContext<'_>, args: FinishArgs) -> ContractResult<Value> {
        let mut record: TripRecord = ctx
            .get_json(&keys::trip(&args.trip_id))?
            .ok_or_else(|| AccessError::UnknownTrip(args.trip_id.clone()))?;
        if record.status == TripStatus::Finished {
            return Err(AccessError::AlreadyFinished(args.trip_id).into());
        }
        let company = record.company.clone().unwrap_or_default();
        if ctx.submitter != company {
            return Err(AccessError::WrongCaller.into());
        }
        let hold_id = record.hold_id.clone().unwrap_or_default();
        ctx.invoke(
            token::NAME,
            "settle",
            &json!({ "hold_id": hold_id, "actual": args.actual_cost }),
        )?;
        let unused = record.trip.max_cost - args.actual_cost;
        for counter in &record.counters {
            ctx.add(&keys::usage(counter), -(unused as i64), Some(0), None)?;
            ctx.add(&keys::spent(counter), args.actual_cost as i64, None, None)?;
        }
        record.status = TripStatus::Finished;
        record.actual_cost = Some(args.actual_cost);
        record.decision_reason = "finished".to_string();
        ctx.put_json(&keys::trip(&args.trip_id), &record);
        Ok(to_value(&record))
    }

    /// Rules-only verdict for `node` (revocation and conditions; no pool, no
    /// budgets).
    fn check_rules(ctx: &mut TxContext<'_>, args: CheckArgs) -> ContractResult<Value> {
        let path = load_path(ctx, &args.node)?;
        let revoked = path.last().expect("non-empty path").revoked;
        let failed = if revoked {
            Some("revoked")
        } else {
            effective_condition(&path).first_failure(&args.context)
        };
        Ok(json!({ "allowed": failed.is_none(), "failed": failed }))
    }
}

impl Contract for AccessContract {
    fn name(&self) -> &str {
        NAME
    }

    fn invoke(&self, ctx: &mut TxContext<'_>, operation: &str, args: &Value) -> ContractResult<Value> {
        match operation {
            "deploy" => Self::deploy(ctx, parse_args(args)?),
            "delegate" => Self::delegate(ctx, parse_args(args)?),
            "revoke" => Self::revoke(ctx, parse_args(args)?),
            "request_access" => {
                let RequestArgs { trip } = parse_args(args)?;
                Self::request_access(ctx, trip)
            }
            "finish_trip" => Self::finish_trip(ctx, parse_args(args)?),
            "check_rules" => Self::check_rules(ctx, parse_args(args)?),
            "node" => {
                let NodeArgs { node } = parse_args(args)?;
                Ok(to_value(&load_node(ctx, &node)?))
            }
            "effective" => {
                let NodeArgs { node } = parse_args(args)?;
                Ok(to_value(&effective_condition(&load_path(ctx, &node)?)))
            }
            "trip" => {
                let TripArgs { trip_id } = parse_args(args)?;
                let record: TripRecord = ctx
                    .get_json(&keys::trip(&trip_id))?
                    .ok_or(AccessError::UnknownTrip(trip_id))?;
                Ok(to_value(&record))
            }
            other => Err(ContractError::new("unknown-operation", other)),
        }
    }
}

/// Invocation builders for clients.
pub mod calls {
    use serde_json::json;

    use super::{Condition, SubLimit, TripContext, TripRequest, NAME};
    use crate::contract::Invocation;

    pub fn deploy(root_conditions: &Condition) -> Invocation {
        Invocation::new(NAME, "deploy", json!({ "root_conditions": root_conditions }))
    }

    pub fn delegate(parent: &str, grantee: &str, conditions: &Condition, sub_limit: Option<SubLimit>) -> Invocation {
        Invocation::new(
            NAME,
            "delegate",
            json!({ "parent": parent, "grantee": grantee, "conditions": conditions, "sub_limit": sub_limit }),
        )
    }

    pub fn revoke(node: &str) -> Invocation {
        Invocation::new(NAME, "revoke", json!({ "node": node }))
    }

    pub fn request_access(trip: &TripRequest) -> Invocation {
        Invocation::new(NAME, "request_access", json!({ "trip": trip }))
    }

    pub fn finish_trip(trip_id: &str, actual_cost: u64) -> Invocation {
        Invocation::new(NAME, "finish_trip", json!({ "trip_id": trip_id, "actual_cost": actual_cost }))
    }

    pub fn check_rules(node: &str, context: &TripContext) -> Invocation {
        Invocation::new(NAME, "check_rules", json!({ "node": node, "context": context }))
    }

    pub fn node(node: &str) -> Invocation {
        Invocation::new(NAME, "node", json!({ "node": node }))
    }

    pub fn trip(trip_id: &str) -> Invocation {
        Invocation::new(NAME, "trip", json!({ "trip_id": trip_id }))
    }

    pub fn effective(node: &str) -> Invocation {
        Invocation::new(NAME, "effective", json!({ "node": node }))
    }
}

/// Direct reads of committed access state.
pub mod view {
    use super::*;
    use crate::ledger::state::decode_int;
    use crate::ledger::WorldState;

    pub fn node(state: &WorldState, id: &str) -> Option<DelegationNode> {
        state
            .get(&format!("{NAME}/{}", keys::node(id)))
            .and_then(|v| serde_json::from_slice(&v.value).ok())
    }

    pub fn nodes(state: &WorldState) -> Vec<DelegationNode> {
        state
            .scan(&format!("{NAME}/node/"))
            .filter_map(|(_, v)| serde_json::from_slice(&v.value).ok())
            .collect()
    }

    pub fn trip(state: &WorldState, trip_id: &str) -> Option<TripRecord> {
        state
            .get(&format!("{NAME}/{}", keys::trip(trip_id)))
            .and_then(|v| serde_json::from_slice(&v.value).ok())
    }

    pub fn trips(state: &WorldState) -> Vec<TripRecord> {
        state
            .scan(&format!("{NAME}/trip/"))
            .filter_map(|(_, v)| serde_json::from_slice(&v.value).ok())
            .collect()
    }

    /// `(counter, reserved + spent, spent)` for every period counter.
    pub fn counters(state: &WorldState) -> Vec<(String, i64, i64)> {
        let prefix = format!("{NAME}/usage/");
        state
            .scan(&prefix)
            .map(|(k, v)| {
                let counter = k[prefix.len()..].to_string();
                let usage = decode_int(&v.value).unwrap_or(0);
                let spent = state
                    .get(&format!("{NAME}/{}", keys::spent(&counter)))
                    .and_then(|s| decode_int(&s.value))
                    .unwrap_or(0);
                (counter, usage, spent)
            })
            .collect()
    }
}
