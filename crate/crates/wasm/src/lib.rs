//! Browser bindings for three operations of the simulator: the benchmark
//! curve, condition evaluation against a trip context, and a single escrow.
//!
//! Each binding has a plain Rust counterpart returning JSON text so the
//! logic can be tested natively.

use std::collections::BTreeMap;

use credchain::access::{Condition, TripContext};
use credchain::bench::{run_suite, WorkloadConfig};
use credchain::ledger::{LedgerConfig, Network, Principal, SimClock};
use credchain::scenario::{run_purchase, PurchaseDecl};
use credchain::token;
use serde_json::json;
use wasm_bindgen::prelude::*;

const ORG: &str = "orgA";
const COMPANY: &str = "companyX";
const CHANNEL: &str = "orgA-chan";

/// Throughput and latency per transaction type over the default rate
/// schedule, one repetition each.
pub fn bench_curve_json(capacity: f64, tx_per_round: usize) -> Result<String, String> {
    let config = WorkloadConfig {
        committer_capacity: capacity,
        tx_per_round,
        repetitions: 1,
        ..WorkloadConfig::default()
    };
    let report = run_suite(&config).map_err(|e| e.to_string())?;
    Ok(report.plot_data().to_string())
}

/// `{"allowed": bool, "failed": kind-or-null}` for a condition and context,
/// both given as JSON.
pub fn evaluate_condition_json(condition: &str, context: &str) -> Result<String, String> {
    let condition: Condition = serde_json::from_str(condition).map_err(|e| format!("condition: {e}"))?;
    let context: TripContext = serde_json::from_str(context).map_err(|e| format!("context: {e}"))?;
    Ok(json!({
        "allowed": condition.allows(&context),
        "failed": condition.first_failure(&context),
    })
    .to_string())
}

/// Runs one escrow between orgA and companyX on a fresh network. The
/// organisation starts with `funds`.
pub fn run_escrow_json(
    credits: u64,
    price: u64,
    tokens: u64,
    payment: u64,
    payment_first: bool,
    funds: u64,
) -> Result<String, String> {
    let fail = |e: &dyn std::fmt::Display| e.to_string();
    let mut clock = SimClock::new(1_707_814_800_000);
    let net = Network::new(LedgerConfig::default());
    net.register_principal(Principal::organisation(ORG), &clock).map_err(|e| fail(&e))?;
    net.register_principal(Principal::company(COMPANY), &clock).map_err(|e| fail(&e))?;
    net.create_channel(CHANNEL, ORG, &[COMPANY], &clock).map_err(|e| fail(&e))?;
    let admin = net.config().admin.clone();
    let minted = net
        .submit_and_commit(CHANNEL, &admin, token::calls::mint(ORG, funds), &clock)
        .map_err(|e| fail(&e))?;
    if let Some(error) = minted.error {
        return Err(error);
    }
    let decl = PurchaseDecl {
        channel: CHANNEL.into(),
        company: COMPANY.into(),
        credits,
        ask: price,
        bid: price,
        price_list: BTreeMap::from([("bus".to_string(), 1)]),
        deposit_tokens: Some(tokens),
        deposit_payment: Some(payment),
        payment_first,
    };
    let (_, outcome) = run_purchase(&net, CHANNEL, &decl, &mut clock).map_err(|e| fail(&e))?;
    let state = net.state(CHANNEL).map_err(|e| fail(&e))?;
    let events: Vec<_> = net
        .events(CHANNEL)
        .map_err(|e| fail(&e))?
        .into_iter()
        .map(|e| json!({ "name": e.name, "recipients": e.recipients() }))
        .collect();
    Ok(json!({
        "outcome": outcome,
        "pool": token::view::pool(&state, COMPANY),
        "accounts": {
            ORG: token::view::account(&state, ORG),
            COMPANY: token::view::account(&state, COMPANY),
        },
        "events": events,
        "state_hash": net.state_hash(CHANNEL).map_err(|e| fail(&e))?,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn bench_curve(capacity: f64, tx_per_round: usize) -> Result<String, JsError> {
    bench_curve_json(capacity, tx_per_round).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn evaluate_condition(condition: &str, context: &str) -> Result<String, JsError> {
    evaluate_condition_json(condition, context).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn run_escrow(
    credits: u64,
    price: u64,
    tokens: u64,
    payment: u64,
    payment_first: bool,
    funds: u64,
) -> Result<String, JsError> {
    run_escrow_json(credits, price, tokens, payment, payment_first, funds).map_err(|e| JsError::new(&e))
}
