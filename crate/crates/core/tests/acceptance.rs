//! Acceptance run: one PASS/FAIL line per criterion, each with its own
//! runtime budget. Built without the libtest harness so the lines always
//! print and the timings are not skewed by tests running in parallel.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::audit::audit;
use common::conditions::{condition, context, delegation_path, grid_context, naive_allows, GRID_SIZE};
use common::escrow::{run_escrow_plan, EscrowPlan};
use common::storm::{run_storm, POOL};
use credchain::access::{effective_condition, DelegationNode};
use credchain::bench::{run_suite, WorkloadConfig};
use credchain::ledger::{read_log, replay};
use credchain::scenario::{fixtures, run_scenario, DelegationAction, Scenario};
use credchain::store::DataDir;
use credchain::token::{self, Phase};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn escrow_atomicity() -> Outcome {
    let (mut released, mut rolled_back) = (0, 0);
    for seed in 0..1_200u64 {
        let plan = EscrowPlan::random(seed);
        match run_escrow_plan(&plan).map_err(|e| format!("seed {seed}: {e}"))?.phase {
            Phase::Released => released += 1,
            Phase::RolledBack => rolled_back += 1,
            other => return Err(format!("seed {seed} ended in {other:?}")),
        }
    }
    if released == 0 || rolled_back == 0 {
        return Err(format!("plans did not cover both outcomes: {released}/{rolled_back}"));
    }
    Ok(format!("1200 interleavings, {released} released, {rolled_back} rolled back"))
}

fn path_nodes(conditions: &[credchain::access::Condition]) -> Vec<DelegationNode> {
    conditions
        .iter()
        .enumerate()
        .map(|(i, c)| DelegationNode {
            node_id: format!("n{i}"),
            grantor: format!("p{}", i.saturating_sub(1)),
            grantee: format!("p{i}"),
            parent: i.checked_sub(1).map(|p| format!("n{p}")),
            added_conditions: c.clone(),
            sub_limit: None,
            revoked: false,
            children: Default::default(),
        })
        .collect()
}

fn monotonicity() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let pairs = (delegation_path(), context());
    let mut checked = 0;
    for _ in 0..10_000 {
        let (path, ctx) = pairs.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let nodes = path_nodes(&path);
        for depth in 1..nodes.len() {
            let child = effective_condition(&nodes[..=depth]).allows(&ctx);
            let parent = effective_condition(&nodes[..depth]).allows(&ctx);
            if child && !parent {
                return Err(format!("child allows but parent denies: {path:?} at {ctx:?}"));
            }
            checked += 1;
        }
    }
    // Twelve conditions over the whole grid, then many over sampled points.
    let conditions = condition();
    let mut grid_points = 0;
    for n in 0..212 {
        let cond = conditions.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let points: Box<dyn Iterator<Item = usize>> = if n < 12 {
            Box::new(0..GRID_SIZE)
        } else {
            Box::new((0..GRID_SIZE).skip(n).step_by(GRID_SIZE / 1_000))
        };
        for i in points {
            let ctx = grid_context(i);
            if cond.allows(&ctx) != naive_allows(&cond, &ctx) {
                return Err(format!("evaluator disagrees on {cond:?} at {ctx:?}"));
            }
            grid_points += 1;
        }
    }
    Ok(format!("10000 pairs ({checked} parent-child checks), {grid_points} grid evaluations"))
}

fn no_overspend() -> Outcome {
    let (mut approved, mut denied) = (0, 0);
    for seed in 0..100 {
        let report = run_storm(seed, 500).map_err(|e| format!("seed {seed}: {e}"))?;
        if report.held + report.spent > POOL {
            return Err(format!("seed {seed}: {} held + {} spent", report.held, report.spent));
        }
        approved += report.approved;
        denied += report.denied;
    }
    Ok(format!("100 seeds x 500 requests, {approved} approved, {denied} denied"))
}

fn over_allocation() -> Outcome {
    let scenario = Scenario::from_json(fixtures::OVER_ALLOCATION).map_err(|e| e.to_string())?;
    let pool = scenario.purchases[0].credits;
    let limits: u64 = scenario
        .delegations
        .iter()
        .filter_map(|d| match d {
            DelegationAction::Delegate { sub_limit, .. } => sub_limit.map(|s| s.credits),
            _ => None,
        })
        .sum();
    if limits != 3 * pool {
        return Err(format!("sub-limits sum to {limits}, pool is {pool}"));
    }
    let run = run_scenario(&scenario).map_err(|e| e.to_string())?;
    audit(&run)?;
    let state = run.network.state("orgO-chan").map_err(|e| e.to_string())?;
    let balance = token::view::pool(&state, "companyZ");
    if balance.spent != pool || balance.held != 0 {
        return Err(format!("spent {} held {} of {pool}", balance.spent, balance.held));
    }
    Ok(format!("sub-limits {limits}, pool {pool}, spent {}", balance.spent))
}

fn benchmark_shape() -> Outcome {
    let config = WorkloadConfig {
        repetitions: 3,
        ..WorkloadConfig::default()
    };
    let report = run_suite(&config).map_err(|e| e.to_string())?;
    let capacity = config.committer_capacity;
    let mut failures = Vec::new();
    for &rate in &config.send_rates {
        let throughput = report.mean_at(rate, |r| r.throughput);
        if rate >= 250.0 && (throughput - capacity).abs() > 0.05 * capacity {
            failures.push(format!("(a) {throughput:.1} tps at {rate}"));
        }
        if rate <= 150.0 && (throughput - rate).abs() > 0.05 * rate {
            failures.push(format!("(b) {throughput:.1} tps at {rate}"));
        }
    }
    let low = report.mean_at(100.0, |r| r.latency_avg);
    let high = report.mean_at(300.0, |r| r.latency_avg);
    if high < 10.0 * low {
        failures.push(format!("(c) latency {high:.3}s at 300 vs {low:.3}s at 100"));
    }
    let ra = report.mean_at(300.0, |r| r.request_access.throughput);
    let ft = report.mean_at(300.0, |r| r.finish_trip.throughput);
    if ra >= ft {
        failures.push(format!("(d) request_access {ra:.1} >= finish_trip {ft:.1}"));
    }
    if !failures.is_empty() {
        return Err(failures.join("; "));
    }
    Ok(format!(
        "plateau {:.1} tps, latency {low:.3}s -> {high:.3}s, saturated request_access {ra:.1} < finish_trip {ft:.1}",
        report.mean_at(300.0, |r| r.throughput)
    ))
}

/// Saves a fresh run of `text` into a new data directory.
fn stored_run(text: &str) -> Result<(tempfile::TempDir, String), String> {
    let scenario = Scenario::from_json(text).map_err(|e| e.to_string())?;
    let run = run_scenario(&scenario).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    DataDir::new(dir.path())
        .save(&run.network, &run.clock, true)
        .map_err(|e| e.to_string())?;
    Ok((dir, run.network_hash()))
}

/// Flips one bit at each of `positions` in turn and requires that parsing
/// and replaying the edited log no longer reproduces `recorded`.
fn flips_detected(log: &[u8], recorded: &str, positions: impl IntoIterator<Item = usize>) -> Result<usize, String> {
    let mut tampered = log.to_vec();
    let mut count = 0;
    for i in positions {
        tampered[i] ^= 0x01;
        let verified = read_log(&tampered[..]).and_then(|b| replay(&b)).map(|s| s.state_hash_hex());
        tampered[i] ^= 0x01;
        if verified.as_deref() == Ok(recorded) {
            return Err(format!("flipping byte {i} went unnoticed"));
        }
        count += 1;
    }
    Ok(count)
}

fn determinism_and_tampering() -> Outcome {
    let (first, hash) = stored_run(fixtures::TWO_ORGS)?;
    let (second, again) = stored_run(fixtures::TWO_ORGS)?;
    if hash != again {
        return Err("state hashes differ between runs".into());
    }
    let store = DataDir::new(first.path());
    let channels = store.stored_channels().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut sampled, mut exhaustive) = (0, 0);
    for channel in &channels {
        let path = store.ledger_path(channel);
        let log = fs::read(&path).map_err(|e| e.to_string())?;
        if log != fs::read(DataDir::new(second.path()).ledger_path(channel)).map_err(|e| e.to_string())? {
            return Err(format!("{channel}: block logs differ between runs"));
        }
        let recorded = store.verify_channel(channel).map_err(|e| e.to_string())?;
        // First, middle and last byte of every block line plus random bytes.
        let mut positions = Vec::new();
        let mut line_start = 0;
        for (i, b) in log.iter().enumerate() {
            if *b == b'\n' {
                positions.extend([line_start, (line_start + i) / 2, i]);
                line_start = i + 1;
            }
        }
        positions.extend((0..400).map(|_| rng.gen_range(0..log.len())));
        sampled += flips_detected(&log, &recorded, positions).map_err(|e| format!("{channel}: {e}"))?;
        // The same edits through the on-disk verifier.
        for i in (0..log.len()).step_by(log.len() / 8 + 1) {
            let mut tampered = log.clone();
            tampered[i] = tampered[i].wrapping_add(1);
            fs::write(&path, &tampered).map_err(|e| e.to_string())?;
            if store.verify_channel(channel).is_ok() {
                return Err(format!("{channel}: stored log edited at byte {i} verified"));
            }
        }
        fs::write(&path, &log).map_err(|e| e.to_string())?;
    }
    // Every single byte of the smaller single-trip logs.
    let (dir, _) = stored_run(fixtures::SINGLE_TRIP)?;
    let store = DataDir::new(dir.path());
    for channel in store.stored_channels().map_err(|e| e.to_string())? {
        let log = fs::read(store.ledger_path(&channel)).map_err(|e| e.to_string())?;
        let recorded = store.verify_channel(&channel).map_err(|e| e.to_string())?;
        exhaustive += flips_detected(&log, &recorded, 0..log.len()).map_err(|e| format!("{channel}: {e}"))?;
    }
    Ok(format!(
        "{} channels identical across runs, {sampled} sampled and {exhaustive} exhaustive byte edits detected",
        channels.len()
    ))
}

fn golden_sequences() -> Outcome {
    let names = |text: &str| -> Result<(Vec<String>, credchain::scenario::ScenarioRun), String> {
        let run = run_scenario(&Scenario::from_json(text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        Ok((run.event_log().into_iter().map(|e| e.name).collect(), run))
    };
    let (events, run) = names(fixtures::SINGLE_TRIP)?;
    let expected = ["token-released", "hold-created", "trip-approved", "trip-settled"];
    if events != expected {
        return Err(format!("single trip produced {events:?}"));
    }
    let released = &run.event_log()[0];
    let mut parties = released.recipients().unwrap_or_default();
    parties.sort();
    if parties != ["companyX", "orgA"] {
        return Err(format!("token-released went to {parties:?}"));
    }
    let (events, _) = names(fixtures::ROLLBACK)?;
    if events != ["escrow-rolled-back"] {
        return Err(format!("rollback produced {events:?}"));
    }
    Ok(format!("{} / escrow-rolled-back", expected.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("escrow atomicity", Duration::from_secs(30), escrow_atomicity),
        ("delegation monotonicity", Duration::from_secs(60), monotonicity),
        ("no overspend under concurrency", Duration::from_secs(60), no_overspend),
        ("over-allocation fixture", Duration::from_secs(60), over_allocation),
        ("benchmark shape", Duration::from_secs(600), benchmark_shape),
        ("determinism and tamper detection", Duration::from_secs(10), determinism_and_tampering),
        ("protocol event sequence", Duration::from_secs(60), golden_sequences),
    ];
    let mut failed = 0;
    for (n, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.1?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({elapsed:.1?})", n + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {} {name}: {reason} ({elapsed:.1?})", n + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
