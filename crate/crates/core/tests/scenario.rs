mod common;

use common::audit::audit;
use credchain::access::TripStatus;
use credchain::ledger::write_log;
use credchain::scenario::{fixtures, run_scenario, DelegationAction, Scenario, ScenarioError, ScenarioRun};
use credchain::token;

fn load(text: &str) -> Scenario {
    Scenario::from_json(text).unwrap()
}

fn logs(run: &ScenarioRun) -> Vec<Vec<u8>> {
    run.network
        .channel_names()
        .iter()
        .map(|c| {
            let mut out = Vec::new();
            write_log(&mut out, &run.network.blocks(c).unwrap()).unwrap();
            out
        })
        .collect()
}

fn event_names(run: &ScenarioRun) -> Vec<String> {
    run.event_log().into_iter().map(|e| e.name).collect()
}

#[test]
fn every_fixture_runs_and_passes_the_audit() {
    for (name, text) in fixtures::all() {
        let run = run_scenario(&load(text)).unwrap_or_else(|e| panic!("{name}: {e}"));
        audit(&run).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn topology_with_two_organisations() {
    let scenario = load(fixtures::TWO_ORGS);
    let run = run_scenario(&scenario).unwrap();
    assert_eq!(run.network.channel_names().len(), 2);
    assert_eq!(run.trips.len(), scenario.all_trips().len());
    assert!(run.purchases.iter().all(|p| p.agreed));
    assert!(run.trips.iter().any(|t| t.status == TripStatus::Finished));
    // No channel sees another channel's principals or keys.
    for channel in run.network.channel_names() {
        let spec = run.network.channel_spec(&channel).unwrap();
        for (_, tx) in common::committed(&run.network.blocks(&channel).unwrap()) {
            let submitter_org = spec.is_member(&tx.submitter)
                || run.network.directory().belongs_to(&tx.submitter, &spec.organisation)
                || tx.submitter == run.network.config().admin;
            assert!(submitter_org, "{} submitted on {channel}", tx.submitter);
        }
    }
}

#[test]
fn same_seed_gives_identical_logs() {
    for (name, text) in fixtures::all() {
        let scenario = load(text);
        let a = run_scenario(&scenario).unwrap();
        let b = run_scenario(&scenario).unwrap();
        assert_eq!(a.network_hash(), b.network_hash(), "{name}");
        assert_eq!(logs(&a), logs(&b), "{name}");
        assert_eq!(a.summary(&scenario), b.summary(&scenario), "{name}");
    }
    let scenario = load(fixtures::TWO_ORGS);
    let mut reseeded = scenario.clone();
    reseeded.seed += 1;
    assert_ne!(
        run_scenario(&scenario).unwrap().network_hash(),
        run_scenario(&reseeded).unwrap().network_hash()
    );
}

#[test]
fn no_trips_leaves_the_setup_state() {
    let mut scenario = load(fixtures::TWO_ORGS);
    scenario.trips.clear();
    scenario.synthetic = None;
    let run = run_scenario(&scenario).unwrap();
    assert_eq!(run.network_hash(), run.setup_hash);
    assert!(run.trips.is_empty());
}

#[test]
fn over_allocation_is_capped_by_the_pool() {
    let scenario = load(fixtures::OVER_ALLOCATION);
    let pool = scenario.purchases[0].credits;
    let sub_limits: u64 = scenario
        .delegations
        .iter()
        .filter_map(|d| match d {
            DelegationAction::Delegate { sub_limit, .. } => sub_limit.map(|s| s.credits),
            _ => None,
        })
        .sum();
    assert_eq!(sub_limits, 3 * pool);

    let run = run_scenario(&scenario).unwrap();
    let state = run.network.state("orgO-chan").unwrap();
    let balance = token::view::pool(&state, "companyZ");
    assert_eq!(balance.spent + balance.held, pool);
    assert_eq!(balance.pool_available, 0);
    assert!(run.trips.iter().any(|t| t.reason == "insufficient-pool"));
    audit(&run).unwrap();
}

#[test]
fn single_trip_event_sequence() {
    let run = run_scenario(&load(fixtures::SINGLE_TRIP)).unwrap();
    assert_eq!(
        event_names(&run),
        ["token-released", "hold-created", "trip-approved", "trip-settled"]
    );
    let released = &run.event_log()[0];
    let mut recipients = released.recipients().unwrap();
    recipients.sort();
    assert_eq!(recipients, ["companyX", "orgA"]);
    assert_eq!(run.trips.len(), 1);
    assert!(run.trips[0].employee_confirmed);
}

#[test]
fn short_deposit_rolls_back_without_trip_events() {
    let run = run_scenario(&load(fixtures::ROLLBACK)).unwrap();
    assert_eq!(event_names(&run), ["escrow-rolled-back"]);
    assert!(run.trips.iter().all(|t| t.status == TripStatus::Denied));
    audit(&run).unwrap();
}

#[test]
fn invalid_scenarios_are_rejected_before_running() {
    match Scenario::from_json("{ \"name\": 3 }") {
        Err(ScenarioError::Parse { .. }) => {}
        other => panic!("{:?}", other.map(|s| s.name)),
    }
    let mut scenario = load(fixtures::SINGLE_TRIP);
    scenario.trips[0].channel = "nowhere".into();
    let err = run_scenario(&scenario).err().expect("should be rejected");
    assert!(err.is_validation(), "{err}");
    let mut scenario = load(fixtures::SINGLE_TRIP);
    scenario.trips[0].max_cost = 0;
    assert!(run_scenario(&scenario).err().expect("should be rejected").is_validation());
}
