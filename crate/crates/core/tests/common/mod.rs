#![allow(dead_code)]

pub mod audit;
pub mod conditions;
pub mod escrow;
pub mod storm;

use std::collections::BTreeMap;

use credchain::access::{self, Condition, GeoPoint, SubLimit, TripRequest};
use credchain::ledger::{Block, LedgerConfig, Network, Principal, SimClock, TxOutcome, Validity, Version, WorldState};
use credchain::token::{self, Proposal};

pub const ORG: &str = "orgA";
pub const COMPANY: &str = "companyX";
pub const CH: &str = "orgA-chan";
pub const DEPT: &str = "dept";

/// 2024-02-13T09:00:00Z, a Tuesday.
pub const TUE_0900: u64 = 1_707_814_800_000;

pub fn origin() -> GeoPoint {
    GeoPoint::new(52.3676, 4.9041)
}

pub fn destination() -> GeoPoint {
    GeoPoint::new(52.0907, 5.1214)
}

pub fn ok(outcome: TxOutcome) -> serde_json::Value {
    assert!(
        outcome.is_valid() && outcome.error.is_none(),
        "transaction failed: {:?} {:?}",
        outcome.validity,
        outcome.error
    );
    outcome.response
}

/// orgA and companyX on one channel, orgA funded with `currency`, the access
/// contract deployed with an empty root condition. No pool yet.
pub fn network(config: LedgerConfig, currency: u64) -> (Network, SimClock) {
    let clock = SimClock::new(TUE_0900 - 3_600_000);
    let net = Network::new(config);
    net.register_principal(Principal::organisation(ORG), &clock).unwrap();
    net.register_principal(Principal::company(COMPANY), &clock).unwrap();
    net.register_principal(Principal::department(DEPT, ORG), &clock).unwrap();
    net.create_channel(CH, ORG, &[COMPANY], &clock).unwrap();
    let admin = net.config().admin.clone();
    ok(net.submit_and_commit(CH, &admin, token::calls::mint(ORG, currency), &clock).unwrap());
    ok(net
        .submit_and_commit(CH, ORG, access::calls::deploy(&Condition::always()), &clock)
        .unwrap());
    (net, clock)
}

pub fn proposal(credits: u64, price: u64) -> Proposal {
    Proposal {
        company: COMPANY.into(),
        organisation: ORG.into(),
        credit_amount: credits,
        total_price: price,
        price_list: BTreeMap::from([("bus".to_string(), 1), ("train".to_string(), 2)]),
    }
}

/// Runs the escrow with matching deposits.
pub fn release_pool(net: &Network, clock: &SimClock, credits: u64, price: u64) {
    ok(net.submit_and_commit(CH, COMPANY, token::calls::init(&proposal(credits, price)), clock).unwrap());
    ok(net
        .submit_and_commit(CH, COMPANY, token::calls::deposit_tokens(COMPANY, credits), clock)
        .unwrap());
    ok(net
        .submit_and_commit(CH, ORG, token::calls::deposit_payment(COMPANY, price), clock)
        .unwrap());
}

/// Delegates root -> dept (no conditions) and returns the node id.
pub fn delegate_dept(net: &Network, clock: &SimClock, sub_limit: Option<SubLimit>) -> String {
    let response = ok(net
        .submit_and_commit(
            CH,
            ORG,
            access::calls::delegate(access::ROOT_NODE, DEPT, &Condition::always(), sub_limit),
            clock,
        )
        .unwrap());
    response["node_id"].as_str().unwrap().to_string()
}

/// Registers `id` as an employee and delegates to it under `parent`.
pub fn add_employee(
    net: &Network,
    clock: &SimClock,
    parent: &str,
    id: &str,
    conditions: &Condition,
    sub_limit: Option<SubLimit>,
) -> String {
    net.register_principal(Principal::employee(id, ORG, "staff"), clock).unwrap();
    let response = ok(net
        .submit_and_commit(CH, DEPT, access::calls::delegate(parent, id, conditions, sub_limit), clock)
        .unwrap());
    response["node_id"].as_str().unwrap().to_string()
}

pub fn trip(trip_id: &str, employee: &str, max_cost: u64) -> TripRequest {
    TripRequest {
        trip_id: trip_id.into(),
        employee: employee.into(),
        transport_type: "bus".into(),
        origin: origin(),
        destination: destination(),
        requested_at: TUE_0900,
        max_cost,
        company: None,
    }
}

/// Every committed transaction in commit order.
pub fn committed(blocks: &[Block]) -> impl Iterator<Item = (Version, &credchain::ledger::TransactionRecord)> {
    blocks.iter().flat_map(|b| {
        b.transactions
            .iter()
            .enumerate()
            .map(move |(i, tx)| (Version::new(b.height, i as u64), tx))
    })
}

/// Checks MVCC soundness independently of the validator: tracks the last
/// writer of each key from the recorded validity flags alone and requires
/// that every valid transaction read exactly those versions.
pub fn mvcc_sound(blocks: &[Block]) -> Result<(), String> {
    let mut last_write: BTreeMap<&str, Option<Version>> = BTreeMap::new();
    for (version, tx) in committed(blocks) {
        if tx.validity != Validity::Valid {
            continue;
        }
        for read in &tx.rwset.reads {
            let current = last_write.get(read.key.as_str()).copied().flatten();
            if current != read.version {
                return Err(format!(
                    "{} read {} at {:?} but it was at {:?}",
                    tx.tx_id, read.key, read.version, current
                ));
            }
        }
        for write in &tx.rwset.writes {
            let v = match write.op {
                credchain::ledger::WriteOp::Delete => None,
                _ => Some(version),
            };
            last_write.insert(write.key.as_str(), v);
        }
    }
    Ok(())
}

/// Serial oracle: rebuilds the network with `setup`, then re-executes every
/// valid transaction committed after `from_height`, one at a time in commit
/// order and at its original submission time. Returns the resulting state
/// and the responses, for comparison with the concurrent run.
pub fn serial_replay(
    setup: impl FnOnce() -> (Network, SimClock),
    blocks: &[Block],
    from_height: u64,
) -> (WorldState, Vec<serde_json::Value>) {
    let (net, _) = setup();
    let mut responses = Vec::new();
    for (version, tx) in committed(blocks) {
        if version.height <= from_height || tx.validity != Validity::Valid {
            continue;
        }
        let clock = SimClock::new(tx.submit_time);
        let outcome = net
            .submit_and_commit(CH, &tx.submitter, tx.invocation.clone(), &clock)
            .unwrap();
        assert!(outcome.is_valid(), "serial re-execution of {} was {:?}", tx.tx_id, outcome.validity);
        responses.push(outcome.response);
    }
    (net.state(CH).unwrap(), responses)
}

/// Responses of the valid transactions after `from_height`, in commit order.
pub fn valid_responses(blocks: &[Block], from_height: u64) -> Vec<serde_json::Value> {
    committed(blocks)
        .filter(|(v, tx)| v.height > from_height && tx.validity == Validity::Valid)
        .map(|(_, tx)| tx.response.clone())
        .collect()
}

/// Credits in the pool, in holds and spent must add up to what was credited.
pub fn credits_conserved(state: &WorldState) -> bool {
    let pool = token::view::pool(state, COMPANY);
    let holds: u64 = token::view::holds(state).iter().map(|h| h.max_amount).sum();
    pool.is_conserved() && pool.held == holds && token::view::raw_available(state, COMPANY) >= 0
}
