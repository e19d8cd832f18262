//! Concurrent Request_Access storms against a small pool.

use credchain::access::{self, Condition, SubLimit};
use credchain::ledger::{LedgerConfig, Network, SimClock, Validity};
use credchain::scenario::submit_concurrently;
use credchain::time::Period;
use credchain::token;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{add_employee, credits_conserved, delegate_dept, mvcc_sound, network, release_pool, serial_replay,
    trip, valid_responses, CH, COMPANY};

pub const POOL: u64 = 100;
pub const EMPLOYEES: usize = 12;

#[derive(Debug, Default)]
pub struct StormReport {
    pub approved: usize,
    pub denied: usize,
    pub held: u64,
    pub spent: u64,
    pub conflicts: usize,
}

fn employee(i: usize) -> String {
    format!("e{i:02}")
}

/// Delegation mix cycling over unrestricted, per-trip caps, weekly
/// sub-limits, bus-only and revoked nodes.
fn setup(seed: u64) -> (Network, SimClock) {
    let (net, clock) = network(LedgerConfig::default(), 1_000);
    release_pool(&net, &clock, POOL, 50);
    let dept = delegate_dept(
        &net,
        &clock,
        Some(SubLimit {
            credits: 3 * POOL,
            period: Period::Week,
        }),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..EMPLOYEES {
        let (cond, limit) = match (i + rng.gen_range(0..5)) % 5 {
            0 => (Condition::always(), None),
            1 => (Condition::MaxPerTrip { credits: 6 }, None),
            2 => (
                Condition::always(),
                Some(SubLimit {
                    credits: rng.gen_range(10..40),
                    period: Period::Week,
                }),
            ),
            3 => (Condition::transport_types(["bus"]), None),
            _ => (
                Condition::all([
                    Condition::transport_types(["bus", "train"]),
                    Condition::BudgetPerPeriod {
                        credits: 25,
                        period: Period::Day,
                    },
                ]),
                None,
            ),
        };
        let node = add_employee(&net, &clock, &dept, &employee(i), &cond, limit);
        if i == EMPLOYEES - 1 {
            super::ok(net.submit_and_commit(CH, super::ORG, access::calls::revoke(&node), &clock).unwrap());
        }
    }
    (net, clock)
}

/// Fires `requests` Request_Access calls of max-cost 1..=10 at once, commits
/// them with client retries, then finishes half of the approved trips
/// concurrently. Checks pool, conservation, MVCC soundness and equivalence
/// with serial re-execution.
pub fn run_storm(seed: u64, requests: usize) -> Result<StormReport, String> {
    let (net, mut clock) = setup(seed);
    let setup_height = net.blocks(CH).unwrap().len() as u64 - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let calls: Vec<_> = (0..requests)
        .map(|n| {
            let who = employee(rng.gen_range(0..EMPLOYEES));
            let mut t = trip(&format!("s{n:04}"), &who, rng.gen_range(1..=10));
            if rng.gen_bool(0.3) {
                t.transport_type = "train".into();
            }
            (who, access::calls::request_access(&t))
        })
        .collect();
    let outcomes = submit_concurrently(&net, CH, calls, &mut clock).map_err(|e| e.to_string())?;
    let mut report = StormReport::default();
    let mut finishes = Vec::new();
    for outcome in &outcomes {
        if outcome.validity != Validity::Valid {
            report.conflicts += 1;
            continue;
        }
        if outcome.error.is_some() {
            return Err(format!("request failed: {:?}", outcome.error));
        }
        match outcome.response["decision"].as_str() {
            Some("approved") => {
                report.approved += 1;
                if rng.gen_bool(0.5) {
                    let id = outcome.response["trip_id"].as_str().unwrap().to_string();
                    finishes.push(id);
                }
            }
            Some("denied") => report.denied += 1,
            other => return Err(format!("unexpected decision {other:?}")),
        }
    }
    let state = net.state(CH).unwrap();
    if token::view::raw_available(&state, COMPANY) < 0 || !credits_conserved(&state) {
        return Err(format!("pool broken after requests: {:?}", token::view::pool(&state, COMPANY)));
    }

    let finish_calls = finishes
        .iter()
        .map(|id| {
            let record = access::view::trip(&state, id).unwrap();
            let actual = rng.gen_range(0..=record.trip.max_cost);
            (COMPANY.to_string(), access::calls::finish_trip(id, actual))
        })
        .collect();
    clock.advance(600_000);
    let outcomes = submit_concurrently(&net, CH, finish_calls, &mut clock).map_err(|e| e.to_string())?;
    if let Some(bad) = outcomes.iter().find(|o| !o.is_valid()) {
        return Err(format!("finish failed: {:?} {:?}", bad.validity, bad.error));
    }

    let state = net.state(CH).unwrap();
    let pool = token::view::pool(&state, COMPANY);
    if token::view::raw_available(&state, COMPANY) < 0 || !credits_conserved(&state) {
        return Err(format!("pool broken after finishes: {pool:?}"));
    }
    let refunds: u64 = token::view::settlements(&state).iter().map(|s| s.refund).sum();
    let expected: u64 = token::view::settlements(&state)
        .iter()
        .map(|s| s.max_amount - s.actual_amount)
        .sum();
    if refunds != expected {
        return Err(format!("refunds {refunds} != {expected}"));
    }
    let blocks = net.blocks(CH).unwrap();
    mvcc_sound(&blocks)?;
    let (serial, responses) = serial_replay(|| setup(seed), &blocks, setup_height);
    if serial.values() != state.values() {
        return Err("serial re-execution reached a different state".into());
    }
    if responses != valid_responses(&blocks, setup_height) {
        return Err("serial re-execution returned different decisions".into());
    }
    report.held = pool.held;
    report.spent = pool.spent;
    Ok(report)
}
