//! Log audits over a finished scenario run.

use std::collections::BTreeMap;

use credchain::access::{self, TripStatus};
use credchain::ledger::Validity;
use credchain::scenario::ScenarioRun;
use credchain::token;

use super::committed;

/// Step ordering, event completeness, event causality and credit
/// conservation on every channel of `run`.
pub fn audit(run: &ScenarioRun) -> Result<(), String> {
    let net = &run.network;
    for channel in net.channel_names() {
        let blocks = net.blocks(&channel).unwrap();
        let events = net.events(&channel).unwrap();

        // Trip events only after some escrow on the channel released, and
        // every request committed before that was denied.
        let release_tx = events.iter().find(|e| e.name == "token-released").map(|e| e.emitting_tx.clone());
        let mut released = false;
        for (_, tx) in committed(&blocks) {
            if Some(&tx.tx_id) == release_tx.as_ref() {
                released = true;
            }
            let trip_op = matches!(tx.invocation.operation.as_str(), "request_access" | "finish_trip");
            if trip_op && !released && tx.validity == Validity::Valid && tx.response["decision"] != "denied" {
                return Err(format!("{channel}: {} committed before the escrow released", tx.tx_id));
            }
        }
        let first_release = events.iter().position(|e| e.name == "token-released");
        for (i, e) in events.iter().enumerate() {
            let trip_event = matches!(e.name.as_str(), "hold-created" | "trip-approved" | "trip-settled");
            if trip_event && first_release.is_none_or(|r| i < r) {
                return Err(format!("{channel}: {} before token-released", e.name));
            }
        }

        for e in &events {
            let valid = committed(&blocks).any(|(_, tx)| tx.tx_id == e.emitting_tx && tx.validity == Validity::Valid);
            if !valid {
                return Err(format!("{channel}: event {} from a non-valid transaction", e.name));
            }
        }

        let mut counts: BTreeMap<(&str, String), usize> = BTreeMap::new();
        for e in &events {
            if let Some(trip) = e.payload.get("trip_id").and_then(|v| v.as_str()) {
                *counts.entry((e.name.as_str(), trip.to_string())).or_default() += 1;
            }
        }
        let state = net.state(&channel).unwrap();
        for record in access::view::trips(&state) {
            let id = record.trip.trip_id.clone();
            let approved = counts.get(&("trip-approved", id.clone())).copied().unwrap_or(0);
            let settled = counts.get(&("trip-settled", id.clone())).copied().unwrap_or(0);
            let expected = match record.status {
                TripStatus::Approved => (1, 0),
                TripStatus::Finished => (1, 1),
                TripStatus::Denied => (0, 0),
            };
            if (approved, settled) != expected {
                return Err(format!("{channel}: trip {id} has {approved} approvals, {settled} settlements"));
            }
        }

        for company in &net.channel_spec(&channel).unwrap().companies {
            let pool = token::view::pool(&state, company);
            if !pool.is_conserved() || token::view::raw_available(&state, company) < 0 {
                return Err(format!("{channel}: pool of {company} not conserved: {pool:?}"));
            }
        }
    }
    Ok(())
}
