//! Open-loop benchmark of the two trip transactions.
//!
//! Each round runs at one fixed send rate: first a Request_Access
//! sub-round, then (once every request has committed) a Finish_Trip
//! sub-round for the approved trips. Transactions go through the real
//! ledger pipeline; only the committer's speed is modelled. The orderer cuts
//! a block at `block_size` transactions or `batch_timeout_ms` after the
//! first waiting one, and the committer works through blocks one at a time,
//! spending `cost / (capacity * mean_cost)` seconds per transaction. With
//! the default mix the committer therefore sustains `capacity` tps on the
//! combined workload.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::access::{self, Condition, GeoPoint, SubLimit, TripRequest};
use crate::contract::Invocation;
use crate::ledger::{LedgerConfig, Network, Principal, SimClock, Validity};
use crate::time::{LogicalTime, Period};
use crate::token::{self, Proposal};

/// Monday 2024-02-12T09:00:00Z; requests are evaluated inside office hours.
const BENCH_EPOCH: LogicalTime = 1_707_728_400_000;
const CHANNEL: &str = "bench-chan";
const ORG: &str = "bench-org";
const COMPANY: &str = "bench-co";
const DEPARTMENT: &str = "bench-dept";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxType {
    RequestAccess,
    FinishTrip,
}

impl TxType {
    pub const ALL: [TxType; 2] = [TxType::RequestAccess, TxType::FinishTrip];

    pub fn label(self) -> &'static str {
        match self {
            TxType::RequestAccess => "request_access",
            TxType::FinishTrip => "finish_trip",
        }
    }
}

impl fmt::Display for TxType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub send_rates: Vec<f64>,
    pub tx_per_round: usize,
    pub repetitions: usize,
    /// Fraction of a round's transactions that are Request_Access.
    pub mix: f64,
    /// Sustained tps of the committer on the configured mix.
    pub committer_capacity: f64,
    pub retry_limit: u32,
    pub seed: u64,
    pub request_cost: f64,
    pub finish_cost: f64,
    pub block_size: usize,
    pub batch_timeout_ms: f64,
    /// Employees the synthetic trips are spread over.
    pub employees: usize,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            send_rates: vec![100.0, 150.0, 200.0, 250.0, 300.0],
            tx_per_round: 20_000,
            repetitions: 10,
            mix: 0.5,
            committer_capacity: 175.0,
            retry_limit: 3,
            seed: 2021,
            request_cost: 1.3,
            finish_cost: 1.0,
            block_size: 50,
            batch_timeout_ms: 200.0,
            employees: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("invalid workload config: {0}")]
    ConfigInvalid(String),
    #[error("benchmark setup failed: {0}")]
    Setup(String),
    #[error("io error: {0}")]
    Io(String),
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::ConfigInvalid(m.to_string()));
        if self.send_rates.is_empty() || self.send_rates.iter().any(|r| !positive(*r)) {
            return bad("send rates must be positive");
        }
        if self.send_rates.windows(2).any(|w| w[0] >= w[1]) {
            return bad("send rates must be strictly increasing");
        }
        if self.tx_per_round == 0 || self.repetitions == 0 {
            return bad("tx_per_round and repetitions must be positive");
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return bad("mix must lie in [0, 1]");
        }
        if !positive(self.committer_capacity) {
            return bad("committer capacity must be positive");
        }
        if !(positive(self.request_cost) && positive(self.finish_cost)) {
            return bad("transaction costs must be positive");
        }
        if self.block_size == 0 || !positive(self.batch_timeout_ms) || self.employees == 0 {
            return bad("block size, batch timeout and employees must be positive");
        }
        Ok(())
    }

    fn mean_cost(&self) -> f64 {
        self.mix * self.request_cost + (1.0 - self.mix) * self.finish_cost
    }

    /// Committer time for one transaction of `ty`, in milliseconds.
    pub fn service_ms(&self, ty: TxType) -> f64 {
        let cost = match ty {
            TxType::RequestAccess => self.request_cost,
            TxType::FinishTrip => self.finish_cost,
        };
        1000.0 * cost / (self.committer_capacity * self.mean_cost())
    }

    /// Throughput ceiling of a sub-round made only of `ty`.
    pub fn saturation_tps(&self, ty: TxType) -> f64 {
        1000.0 / self.service_ms(ty)
    }

    /// Request_Access count for a round; the rest are Finish_Trip.
    pub fn request_count(&self) -> usize {
        (self.tx_per_round as f64 * self.mix).round() as usize
    }
}

/// One transaction of the generated stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedTx {
    /// Offset from the start of its sub-round, in milliseconds.
    pub offset_ms: f64,
    pub tx_type: TxType,
    pub submitter: String,
    pub invocation: Invocation,
}

/// The Request_Access and Finish_Trip streams of one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub send_rate: f64,
    pub requests: Vec<TimedTx>,
    pub finishes: Vec<TimedTx>,
}

fn employee_id(i: usize) -> String {
    format!("bench-e{i:03}")
}

/// Deterministic stream for one round. Finish_Trip transactions target the
/// first trips requested.
pub fn generate_workload(config: &WorkloadConfig, send_rate: f64, seed: u64) -> Result<Workload, BenchError> {
    config.validate()?;
    if !positive(send_rate) {
        return Err(BenchError::ConfigInvalid("send rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = 1000.0 / send_rate;
    let n_requests = config.request_count();
    let n_finishes = config.tx_per_round - n_requests;
    let origin = GeoPoint::new(-33.8688, 151.2093);
    let destination = GeoPoint::new(-33.8915, 151.2767);
    let mut requests = Vec::with_capacity(n_requests);
    let mut costs = Vec::with_capacity(n_requests);
    for i in 0..n_requests {
        let employee = employee_id(rng.gen_range(0..config.employees));
        let max_cost = rng.gen_range(1..=10u64);
        costs.push((max_cost, rng.gen_range(1..=max_cost)));
        let trip = TripRequest {
            trip_id: format!("trip-{i:06}"),
            employee: employee.clone(),
            transport_type: if rng.gen_bool(0.5) { "bus" } else { "train" }.to_string(),
            origin,
            destination,
            requested_at: BENCH_EPOCH,
            max_cost,
            company: None,
        };
        requests.push(TimedTx {
            offset_ms: i as f64 * gap,
            tx_type: TxType::RequestAccess,
            submitter: employee,
            invocation: access::calls::request_access(&trip),
        });
    }
    let finishes = (0..n_finishes)
        .map(|i| {
            // With more finishes than requests, the surplus repeats trips
            // and fails with already-finished.
            let target = if n_requests == 0 { i } else { i % n_requests };
            let actual = costs.get(target).map_or(1, |c| c.1);
            TimedTx {
                offset_ms: i as f64 * gap,
                tx_type: TxType::FinishTrip,
                submitter: COMPANY.to_string(),
                invocation: access::calls::finish_trip(&format!("trip-{target:06}"), actual),
            }
        })
        .collect();
    Ok(Workload {
        send_rate,
        requests,
        finishes,
    })
}

/// Per-type results of one round. Latencies are in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeMetrics {
    pub tx_type: TxType,
    pub submitted: usize,
    pub valid: usize,
    pub failed: usize,
    pub conflicts: usize,
    pub throughput: f64,
    pub latency_avg: f64,
    pub latency_p95: f64,
    pub latency_max: f64,
    pub mvcc_conflict_rate: f64,
    /// Time-averaged number of submitted but uncommitted transactions.
    pub mean_queue: f64,
    /// Sub-round span from first submit to last commit, in seconds.
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub send_rate: f64,
    pub repetition: usize,
    pub request_access: TypeMetrics,
    pub finish_trip: TypeMetrics,
    /// Valid transactions of both types over the two sub-round spans.
    pub throughput: f64,
    pub latency_avg: f64,
}

impl RoundMetrics {
    pub fn of(&self, ty: TxType) -> &TypeMetrics {
        match ty {
            TxType::RequestAccess => &self.request_access,
            TxType::FinishTrip => &self.finish_trip,
        }
    }
}

/// A benchmark network: one organisation, one company, a department and
/// `config.employees` employees with generous limits.
pub fn setup_network(config: &WorkloadConfig) -> Result<Network, BenchError> {
    let fail = |e: &dyn fmt::Display| BenchError::Setup(e.to_string());
    let ledger_config = LedgerConfig {
        block_size: config.block_size,
        retry_limit: config.retry_limit,
        ..LedgerConfig::default()
    };
    let admin = ledger_config.admin.clone();
    let net = Network::new(ledger_config);
    let clock = SimClock::new(BENCH_EPOCH - 3_600_000);
    let mut principals = vec![
        Principal::organisation(ORG),
        Principal::company(COMPANY),
        Principal::department(DEPARTMENT, ORG),
    ];
    principals.extend((0..config.employees).map(|i| Principal::employee(employee_id(i), ORG, "engineer")));
    for p in principals {
        net.register_principal(p, &clock).map_err(|e| fail(&e))?;
    }
    net.create_channel(CHANNEL, ORG, &[COMPANY], &clock).map_err(|e| fail(&e))?;
    net.with_channel(CHANNEL, |l| l.set_record_snapshots(false)).map_err(|e| fail(&e))?;

    let credits = (config.request_count() as u64 + 1) * 10;
    let proposal = Proposal {
        company: COMPANY.into(),
        organisation: ORG.into(),
        credit_amount: credits,
        total_price: credits,
        price_list: BTreeMap::from([("bus".to_string(), 1), ("train".to_string(), 2)]),
    };
    let limit = SubLimit {
        credits,
        period: Period::Week,
    };
    let mut steps: Vec<(String, Invocation)> = vec![
        (admin, token::calls::mint(ORG, credits)),
        (COMPANY.into(), token::calls::init(&proposal)),
        (COMPANY.into(), token::calls::deposit_tokens(COMPANY, credits)),
        (ORG.into(), token::calls::deposit_payment(COMPANY, credits)),
        (ORG.into(), access::calls::deploy(&Condition::always())),
        (
            ORG.into(),
            access::calls::delegate(
                access::ROOT_NODE,
                DEPARTMENT,
                &Condition::transport_types(["bus", "train"]),
                Some(limit),
            ),
        ),
    ];
    for i in 0..config.employees {
        steps.push((
            DEPARTMENT.into(),
            access::calls::delegate("n1", &employee_id(i), &Condition::MaxPerTrip { credits: 10 }, Some(limit)),
        ));
    }
    for (submitter, invocation) in steps {
        let op = invocation.operation.clone();
        let outcome = net
            .submit_and_commit(CHANNEL, &submitter, invocation, &clock)
            .map_err(|e| fail(&e))?;
        if !outcome.is_valid() {
            return Err(BenchError::Setup(format!("{op}: {:?} {:?}", outcome.validity, outcome.error)));
        }
    }
    Ok(net)
}

struct Flight {
    index: usize,
    tx_id: String,
    first_submit: f64,
    attempts: u32,
}

struct CutBlock {
    size: usize,
    commit_at: f64,
}

/// Event-driven run of one sub-round starting at `start_ms`. Returns its
/// metrics and the time of the last commit.
fn run_stream(
    net: &Network,
    config: &WorkloadConfig,
    stream: &[TimedTx],
    send_rate: f64,
    start_ms: f64,
) -> (TypeMetrics, f64) {
    let ty = stream.first().map_or(TxType::RequestAccess, |t| t.tx_type);
    let service = config.service_ms(ty);
    let mut clock = SimClock::new(BENCH_EPOCH);
    let stamp = |clock: &mut SimClock, at: f64| clock.advance_to(BENCH_EPOCH + at.max(0.0).round() as u64);

    let mut next_arrival = 0;
    let mut retries: VecDeque<(f64, usize, f64, u32)> = VecDeque::new();
    // Orderer batch waiting to be cut: (first arrival, flights).
    let mut batch: Vec<Flight> = Vec::new();
    let mut batch_opened = 0.0;
    let mut cut: VecDeque<(CutBlock, Vec<Flight>)> = VecDeque::new();
    let mut busy_until = start_ms;

    let mut latencies = Vec::with_capacity(stream.len());
    let (mut valid, mut failed, mut conflicts, mut submissions) = (0usize, 0usize, 0usize, 0usize);
    let mut first_submit = f64::INFINITY;
    let mut last_commit = start_ms;
    // Queue-length integral: (time, +arrivals / -commits).
    let mut queue_events: Vec<(f64, i64)> = Vec::with_capacity(stream.len() * 2);

    let cut_batch = |batch: &mut Vec<Flight>, at: f64, busy_until: &mut f64, cut: &mut VecDeque<(CutBlock, Vec<Flight>)>| {
        let flights = std::mem::take(batch);
        let start = at.max(*busy_until);
        let commit_at = start + service * flights.len() as f64;
        *busy_until = commit_at;
        cut.push_back((
            CutBlock {
                size: flights.len(),
                commit_at,
            },
            flights,
        ));
    };

    loop {
        let arrival = stream.get(next_arrival).map(|t| start_ms + t.offset_ms);
        let retry = retries.front().map(|r| r.0);
        let next_submit = match (arrival, retry) {
            (Some(a), Some(r)) => Some(a.min(r)),
            (a, r) => a.or(r),
        };
        let timeout = (!batch.is_empty()).then_some(batch_opened + config.batch_timeout_ms);
        let commit = cut.front().map(|(b, _)| b.commit_at);

        // Earliest event wins; commits before cuts before submissions at
        // equal times.
        let mut best: Option<(f64, u8)> = None;
        for (t, kind) in [(commit, 0u8), (timeout, 1), (next_submit, 2)] {
            if let Some(t) = t {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, kind));
                }
            }
        }
        let Some((now, kind)) = best else { break };
        match kind {
            0 => {
                let (block, flights) = cut.pop_front().expect("commit scheduled");
                stamp(&mut clock, now);
                net.commit_block_limited(CHANNEL, block.size, &clock)
                    .expect("bench channel exists");
                queue_events.push((now, -(block.size as i64)));
                for flight in flights {
                    let record = net
                        .transaction(CHANNEL, &flight.tx_id)
                        .expect("bench channel exists")
                        .expect("committed in this block");
                    match record.validity {
                        Validity::MvccConflict => {
                            conflicts += 1;
                            if flight.attempts <= config.retry_limit {
                                retries.push_back((now, flight.index, flight.first_submit, flight.attempts + 1));
                                continue;
                            }
                            failed += 1;
                        }
                        Validity::Valid => valid += 1,
                        Validity::EndorsementError => failed += 1,
                    }
                    latencies.push((now - flight.first_submit) / 1000.0);
                    last_commit = last_commit.max(now);
                }
            }
            1 => cut_batch(&mut batch, now, &mut busy_until, &mut cut),
            _ => {
                let (index, first, attempts) = if retry == Some(now) && arrival.is_none_or(|a| now < a) {
                    let (_, index, first, attempts) = retries.pop_front().expect("retry scheduled");
                    (index, first, attempts)
                } else {
                    next_arrival += 1;
                    (next_arrival - 1, now, 1)
                };
                let tx = &stream[index];
                stamp(&mut clock, now);
                let tx_id = net
                    .submit(CHANNEL, &tx.submitter, tx.invocation.clone(), &clock)
                    .expect("bench submitter is a channel member");
                submissions += 1;
                first_submit = first_submit.min(first);
                queue_events.push((now, 1));
                if batch.is_empty() {
                    batch_opened = now;
                }
                batch.push(Flight {
                    index,
                    tx_id,
                    first_submit: first,
                    attempts,
                });
                if batch.len() >= config.block_size {
                    cut_batch(&mut batch, now, &mut busy_until, &mut cut);
                }
            }
        }
    }

    let n = stream.len();
    let send_span = n as f64 / send_rate;
    let span = if n == 0 { 0.0 } else { (last_commit - first_submit) / 1000.0 };
    let duration = span.max(send_span);
    latencies.sort_by(f64::total_cmp);
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let p95 = if latencies.is_empty() {
        0.0
    } else {
        latencies[((latencies.len() as f64 * 0.95).ceil() as usize).clamp(1, latencies.len()) - 1]
    };
    let metrics = TypeMetrics {
        tx_type: ty,
        submitted: n,
        valid,
        failed,
        conflicts,
        throughput: if duration > 0.0 { valid as f64 / duration } else { 0.0 },
        latency_avg: mean(&latencies),
        latency_p95: p95,
        latency_max: latencies.last().copied().unwrap_or(0.0),
        mvcc_conflict_rate: if submissions == 0 { 0.0 } else { conflicts as f64 / submissions as f64 },
        mean_queue: time_average(&mut queue_events),
        duration,
    };
    (metrics, last_commit)
}

/// Time-averaged level of a step function given as (time, delta) pairs.
fn time_average(events: &mut [(f64, i64)]) -> f64 {
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return 0.0;
    };
    let span = last.0 - first.0;
    if span <= 0.0 {
        return 0.0;
    }
    let mut level = 0i64;
    let mut area = 0.0;
    let mut prev = first.0;
    for &(t, delta) in events.iter() {
        area += level as f64 * (t - prev);
        level += delta;
        prev = t;
    }
    area / span
}

/// Runs one round at `workload.send_rate` on a fresh network.
pub fn run_round(config: &WorkloadConfig, workload: &Workload, repetition: usize) -> Result<RoundMetrics, BenchError> {
    let net = setup_network(config)?;
    let (request_access, end) = run_stream(&net, config, &workload.requests, workload.send_rate, 0.0);
    let (finish_trip, _) = run_stream(&net, config, &workload.finishes, workload.send_rate, end);
    let valid = (request_access.valid + finish_trip.valid) as f64;
    let span = request_access.duration + finish_trip.duration;
    let weighted = request_access.latency_avg * request_access.submitted as f64
        + finish_trip.latency_avg * finish_trip.submitted as f64;
    let total = (request_access.submitted + finish_trip.submitted).max(1) as f64;
    Ok(RoundMetrics {
        send_rate: workload.send_rate,
        repetition,
        throughput: if span > 0.0 { valid / span } else { 0.0 },
        latency_avg: weighted / total,
        request_access,
        finish_trip,
    })
}

fn round_seed(seed: u64, rate: f64, repetition: usize) -> u64 {
    seed ^ (rate.to_bits().rotate_left(17)) ^ (repetition as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stddev: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self::default();
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let stddev = if v.len() < 2 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        Self { mean, stddev }
    }
}

/// Aggregated cell of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub send_rate: f64,
    pub tx_type: String,
    pub throughput: Stat,
    pub latency_avg: Stat,
    pub latency_p95: Stat,
    pub latency_max: Stat,
    pub conflict_rate: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: WorkloadConfig,
    pub rounds: Vec<RoundMetrics>,
}

impl SuiteReport {
    pub fn rounds_at(&self, rate: f64) -> impl Iterator<Item = &RoundMetrics> {
        self.rounds.iter().filter(move |r| r.send_rate == rate)
    }

    /// Mean over repetitions of `f` at `rate`.
    pub fn mean_at(&self, rate: f64, f: impl Fn(&RoundMetrics) -> f64) -> f64 {
        Stat::of(self.rounds_at(rate).map(f)).mean
    }

    /// One row per (rate, tx type), plus the combined `all` rows.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for &rate in &self.config.send_rates {
            for ty in TxType::ALL {
                let cells: Vec<&TypeMetrics> = self.rounds_at(rate).map(|r| r.of(ty)).collect();
                rows.push(SummaryRow {
                    send_rate: rate,
                    tx_type: ty.label().to_string(),
                    throughput: Stat::of(cells.iter().map(|m| m.throughput)),
                    latency_avg: Stat::of(cells.iter().map(|m| m.latency_avg)),
                    latency_p95: Stat::of(cells.iter().map(|m| m.latency_p95)),
                    latency_max: Stat::of(cells.iter().map(|m| m.latency_max)),
                    conflict_rate: Stat::of(cells.iter().map(|m| m.mvcc_conflict_rate)),
                });
            }
            rows.push(SummaryRow {
                send_rate: rate,
                tx_type: "all".to_string(),
                throughput: Stat::of(self.rounds_at(rate).map(|r| r.throughput)),
                latency_avg: Stat::of(self.rounds_at(rate).map(|r| r.latency_avg)),
                latency_p95: Stat::default(),
                latency_max: Stat::default(),
                conflict_rate: Stat::default(),
            });
        }
        rows
    }

    /// `rate,rep,tx-type,throughput,lat-avg,lat-p95,lat-max,conflicts`, one
    /// line per round and transaction type.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rate,rep,tx-type,throughput,lat-avg,lat-p95,lat-max,conflicts\n");
        for r in &self.rounds {
            for ty in TxType::ALL {
                let m = r.of(ty);
                out.push_str(&format!(
                    "{},{},{},{:.3},{:.4},{:.4},{:.4},{}\n",
                    r.send_rate, r.repetition, ty, m.throughput, m.latency_avg, m.latency_p95, m.latency_max, m.conflicts
                ));
            }
        }
        out
    }

    /// Plot series keyed by transaction type: `throughput` and `latency`
    /// panels, each a list of `[rate, mean, stddev]`.
    pub fn plot_data(&self) -> Value {
        let mut throughput = serde_json::Map::new();
        let mut latency = serde_json::Map::new();
        for row in self.summary() {
            let point = |s: Stat| json!([row.send_rate, s.mean, s.stddev]);
            throughput
                .entry(row.tx_type.clone())
                .or_insert_with(|| json!([]))
                .as_array_mut()
                .expect("array")
                .push(point(row.throughput));
            latency
                .entry(row.tx_type.clone())
                .or_insert_with(|| json!([]))
                .as_array_mut()
                .expect("array")
                .push(point(row.latency_avg));
        }
        json!({
            "committer_capacity": self.config.committer_capacity,
            "throughput": throughput,
            "latency": latency,
        })
    }

    /// Fixed-width table of the summary rows.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>6}  {:<15} {:>16} {:>16} {:>10} {:>10}\n",
            "rate", "tx-type", "throughput", "lat-avg (s)", "p95 (s)", "max (s)"
        );
        for row in self.summary() {
            // Percentiles are only tracked per transaction type.
            let (p95, max) = if row.tx_type == "all" {
                ("-".to_string(), "-".to_string())
            } else {
                (format!("{:.3}", row.latency_p95.mean), format!("{:.3}", row.latency_max.mean))
            };
            out.push_str(&format!(
                "{:>6}  {:<15} {:>8.1} ± {:<5.1} {:>8.3} ± {:<5.2} {:>10} {:>10}\n",
                row.send_rate,
                row.tx_type,
                row.throughput.mean,
                row.throughput.stddev,
                row.latency_avg.mean,
                row.latency_avg.stddev,
                p95,
                max
            ));
        }
        out
    }
}

/// All rates × repetitions. `progress` is called after every round.
pub fn run_suite_with(config: &WorkloadConfig, mut progress: impl FnMut(&RoundMetrics)) -> Result<SuiteReport, BenchError> {
    config.validate()?;
    let mut rounds = Vec::with_capacity(config.send_rates.len() * config.repetitions);
    for &rate in &config.send_rates {
        for rep in 0..config.repetitions {
            let workload = generate_workload(config, rate, round_seed(config.seed, rate, rep))?;
            let metrics = run_round(config, &workload, rep)?;
            progress(&metrics);
            rounds.push(metrics);
        }
    }
    Ok(SuiteReport {
        config: config.clone(),
        rounds,
    })
}

pub fn run_suite(config: &WorkloadConfig) -> Result<SuiteReport, BenchError> {
    run_suite_with(config, |_| {})
}

/// Writes `metrics.csv`, `summary.json` and `plot.json` under `dir`.
pub fn write_outputs(report: &SuiteReport, dir: &std::path::Path) -> Result<(), BenchError> {
    let io = |e: std::io::Error| BenchError::Io(e.to_string());
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("metrics.csv"), report.to_csv()).map_err(io)?;
    let summary = serde_json::to_string_pretty(&report.summary()).expect("summary serializes");
    std::fs::write(dir.join("summary.json"), summary + "\n").map_err(io)?;
    let plot = serde_json::to_string_pretty(&report.plot_data()).expect("plot serializes");
    std::fs::write(dir.join("plot.json"), plot + "\n").map_err(io)?;
    Ok(())
}
