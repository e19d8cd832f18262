//! `credchain`: drive a simulated transport-credit network stored in a local
//! data directory.
//!
//! Exit codes: 0 success, 2 usage or state error, 3 validation error,
//! 4 verification failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use credchain::access::{self, Condition, Decision, DelegationNode, GeoPoint, SubLimit, TripRecord, TripRequest};
use credchain::bench::{self, BenchError, WorkloadConfig};
use credchain::ledger::{LedgerConfig, LedgerError, Network, Principal, PrincipalKind, SimClock, TxOutcome, BASE_CHANNEL};
use credchain::scenario::{self, PurchaseDecl, PurchaseOutcome, Scenario, ScenarioError};
use credchain::store::{DataDir, StoreError};
use credchain::time::{parse_time, Period};
use credchain::token;
use serde_json::Value;

/// Logical time charged to each command.
const COMMAND_STEP_MS: u64 = 1_000;

#[derive(Parser)]
#[command(name = "credchain", version, about = "Simulated permissioned network for delegated transport credits")]
struct Cli {
    /// Directory holding block logs, state hashes and outputs.
    #[arg(long, global = true, env = "CREDCHAIN_DATA_DIR", default_value = "credchain-data")]
    data_dir: PathBuf,
    /// Append delivered events to events/<channel>.jsonl.
    #[arg(long, global = true)]
    events: bool,
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create the base network ledger.
    #[command(subcommand)]
    Network(NetworkCmd),
    /// Register principals on the base ledger.
    #[command(subcommand)]
    Principal(PrincipalCmd),
    /// Mint settlement currency.
    #[command(subcommand)]
    Account(AccountCmd),
    /// Create organisation channels.
    #[command(subcommand)]
    Channel(ChannelCmd),
    /// Deploy the access-control contract.
    #[command(subcommand)]
    Contract(ContractCmd),
    /// Buy credits through the token escrow.
    #[command(subcommand)]
    Escrow(EscrowCmd),
    /// Delegate or revoke access.
    #[command(subcommand)]
    Access(AccessCmd),
    /// Request and finish trips.
    #[command(subcommand)]
    Trip(TripCmd),
    /// Export or verify block logs.
    #[command(subcommand)]
    Ledger(LedgerCmd),
    /// Run scenario files.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Run the throughput/latency benchmark.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand)]
enum NetworkCmd {
    /// Create the base ledger in the data directory; prints its name.
    Init {
        /// Maximum transactions per block.
        #[arg(long, default_value_t = 50)]
        block_size: usize,
        /// Client resubmissions after an MVCC conflict.
        #[arg(long, default_value_t = 3)]
        retry_limit: u32,
        /// Network administrator principal; the only one allowed to mint currency.
        #[arg(long, default_value = "network-admin")]
        admin: String,
        /// Logical start time (ms or RFC 3339).
        #[arg(long, default_value = "2024-02-12T08:00:00Z")]
        start: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Organisation,
    Department,
    Employee,
    TransportCompany,
}

impl From<KindArg> for PrincipalKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Organisation => PrincipalKind::Organisation,
            KindArg::Department => PrincipalKind::Department,
            KindArg::Employee => PrincipalKind::Employee,
            KindArg::TransportCompany => PrincipalKind::TransportCompany,
        }
    }
}

#[derive(Subcommand)]
enum PrincipalCmd {
    /// Register a principal; prints its id.
    Add {
        /// Principal id.
        #[arg(long)]
        id: String,
        /// Principal kind.
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Owning organisation (departments and employees).
        #[arg(long)]
        org: Option<String>,
        /// Employee role, checked by role conditions.
        #[arg(long, default_value = "")]
        role: String,
    },
}

#[derive(Subcommand)]
enum AccountCmd {
    /// Mint currency into an account; prints the new balance.
    Fund {
        /// Channel name.
        #[arg(long)]
        channel: String,
        /// Account owner.
        #[arg(long)]
        owner: String,
        /// Currency to mint.
        #[arg(long)]
        amount: u64,
    },
}

#[derive(Subcommand)]
enum ChannelCmd {
    /// Create a channel for an organisation and its companies; prints the channel name.
    Create {
        /// Defaults to `<org>-chan`.
        #[arg(long)]
        name: Option<String>,
        /// Organisation owning the channel.
        #[arg(long)]
        org: String,
        /// Transport company on the channel, repeatable.
        #[arg(long = "company", required = true)]
        companies: Vec<String>,
    },
}

#[derive(Subcommand)]
enum ContractCmd {
    /// Deploy the access contract with a root condition; prints the root node id.
    Deploy {
        /// Channel name.
        #[arg(long)]
        channel: String,
        /// Root condition as JSON, or @file.
        #[arg(long)]
        conditions: Option<String>,
    },
}

#[derive(Subcommand)]
enum EscrowCmd {
    /// Negotiate, then run init and both deposits; prints released, rolled-back or not-agreed.
    Run(EscrowArgs),
}

#[derive(Args)]
struct EscrowArgs {
    /// Channel name.
    #[arg(long)]
    channel: String,
    /// Transport company selling the credits.
    #[arg(long)]
    company: String,
    /// Credits to buy.
    #[arg(long)]
    credits: u64,
    /// Company's asking price.
    #[arg(long)]
    ask: u64,
    /// Organisation's bid.
    #[arg(long)]
    bid: u64,
    /// Price list entry `type=credits`, repeatable.
    #[arg(long = "price", required = true, value_parser = parse_price)]
    prices: Vec<(String, u64)>,
    /// Tokens actually deposited (defaults to --credits).
    #[arg(long)]
    tokens: Option<u64>,
    /// Payment actually deposited (defaults to the agreed price).
    #[arg(long)]
    payment: Option<u64>,
    /// Deposit the payment before the tokens.
    #[arg(long)]
    payment_first: bool,
}

#[derive(Subcommand)]
enum AccessCmd {
    /// Add a delegation node under a parent; prints the new node id.
    Delegate {
        /// Channel name.
        #[arg(long)]
        channel: String,
        /// Parent delegation node.
        #[arg(long, default_value = access::ROOT_NODE)]
        parent: String,
        /// Principal receiving the delegation.
        #[arg(long)]
        grantee: String,
        /// Added condition as JSON, or @file.
        #[arg(long)]
        conditions: Option<String>,
        /// `credits/period`, e.g. 200/week.
        #[arg(long, value_parser = parse_sub_limit)]
        sub_limit: Option<SubLimit>,
        /// Submitter; defaults to the parent node's grantee.
        #[arg(long = "as")]
        caller: Option<String>,
    },
    /// Revoke a node and its subtree; prints the revoked ids.
    Revoke {
        /// Channel name.
        #[arg(long)]
        channel: String,
        /// Node to revoke, together with its subtree.
        #[arg(long)]
        node: String,
        /// Submitter; defaults to the channel's organisation.
        #[arg(long = "as")]
        caller: Option<String>,
    },
}

#[derive(Subcommand)]
enum TripCmd {
    /// Request access for a trip; prints the decision.
    Request {
        /// Channel name.
        #[arg(long)]
        channel: String,
        /// Trip id, unique per channel.
        #[arg(long)]
        trip_id: String,
        /// Employee taking the trip.
        #[arg(long)]
        employee: String,
        /// Transport type, e.g. bus or train.
        #[arg(long = "type")]
        transport_type: String,
        /// `lat,lon`
        #[arg(long, value_parser = parse_point)]
        from: GeoPoint,
        /// `lat,lon`
        #[arg(long, value_parser = parse_point)]
        to: GeoPoint,
        /// Request time (ms or RFC 3339); defaults to the network clock.
        #[arg(long)]
        at: Option<String>,
        /// Most credits the trip may cost; held at approval.
        #[arg(long)]
        max_cost: u64,
        /// Company to hold against; defaults to the first one pricing the transport type.
        #[arg(long)]
        company: Option<String>,
        /// Submitter; defaults to the employee.
        #[arg(long = "as")]
        caller: Option<String>,
    },
    /// Settle a finished trip against its hold; prints the charge and refund.
    Finish {
        /// Channel name.
        #[arg(long)]
        channel: String,
        /// Trip id, unique per channel.
        #[arg(long)]
        trip_id: String,
        /// Credits actually charged; the rest of the hold is refunded.
        #[arg(long)]
        actual: u64,
        /// Submitter; defaults to the company holding the trip.
        #[arg(long = "as")]
        caller: Option<String>,
    },
}

#[derive(Subcommand)]
enum LedgerCmd {
    /// Print a channel's block log (JSON lines).
    Export {
        /// Channel name.
        #[arg(long, default_value = BASE_CHANNEL)]
        channel: String,
        /// Write to this path under the data directory instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay stored logs and compare with the recorded state hashes.
    Verify {
        /// Only this channel; all stored logs by default.
        #[arg(long)]
        channel: Option<String>,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Run a scenario file into scenarios/<name>/; prints the network hash.
    Run {
        /// Scenario JSON file.
        file: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory name under scenarios/; defaults to the scenario name.
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Run the benchmark suite into bench/<name>/; prints the summary table.
    Run {
        /// Workload config JSON; defaults apply to missing fields.
        config: Option<PathBuf>,
        /// Send rates in tps, comma separated and strictly increasing.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        /// Repetitions per rate.
        #[arg(long)]
        reps: Option<usize>,
        /// Transactions per round, split between the two types by the mix.
        #[arg(long)]
        tx_per_round: Option<usize>,
        /// Committer capacity in tps.
        #[arg(long)]
        capacity: Option<f64>,
        /// Workload seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory name under bench/.
        #[arg(long, default_value = "latest")]
        name: String,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn state(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = if e.is_verification_failure() { 4 } else { 2 };
        Self {
            code,
            message: format!("{}: {e}", e.code()),
        }
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::Contract(e) => Self::state(e.to_string()),
            e => Self::state(format!("{}: {e}", e.code())),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Self {
            code: if e.is_validation() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Self {
            code: if matches!(e, BenchError::ConfigInvalid(_)) { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

fn parse_price(s: &str) -> Result<(String, u64), String> {
    let (name, credits) = s.split_once('=').ok_or("expected type=credits")?;
    let credits = credits.parse().map_err(|e| format!("{e}"))?;
    Ok((name.to_string(), credits))
}

fn parse_point(s: &str) -> Result<GeoPoint, String> {
    let (lat, lon) = s.split_once(',').ok_or("expected lat,lon")?;
    let lat = lat.trim().parse().map_err(|e| format!("latitude: {e}"))?;
    let lon = lon.trim().parse().map_err(|e| format!("longitude: {e}"))?;
    Ok(GeoPoint::new(lat, lon))
}

fn parse_sub_limit(s: &str) -> Result<SubLimit, String> {
    let (credits, period) = s.split_once('/').ok_or("expected credits/period")?;
    let credits = credits.parse().map_err(|e| format!("{e}"))?;
    let period = match period {
        "day" => Period::Day,
        "week" => Period::Week,
        "month" => Period::Month,
        other => return Err(format!("unknown period {other}")),
    };
    Ok(SubLimit { credits, period })
}

fn parse_condition(arg: Option<&str>) -> Result<Condition, Failure> {
    let Some(arg) = arg else {
        return Ok(Condition::always());
    };
    let text = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| Failure::state(format!("{path}: {e}")))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| Failure::validation(format!("bad condition: {e}")))
}

fn parse_at(at: Option<&str>, clock: &SimClock) -> Result<u64, Failure> {
    match at {
        None => Ok(clock.now()),
        Some(s) => parse_time(s).ok_or_else(|| Failure::validation(format!("bad time {s:?}"))),
    }
}

/// Relative path confined to the data directory.
fn confined(root: &Path, rel: &Path) -> Result<PathBuf, Failure> {
    let ok = rel.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if !ok {
        return Err(Failure::state(format!(
            "{} must be a relative path inside the data directory",
            rel.display()
        )));
    }
    Ok(root.join(rel))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::state(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::state(format!("{}: {e}", path.display())))
}

/// A committed contract call must be valid and error-free.
fn require_valid(outcome: TxOutcome, what: &str) -> Result<Value, Failure> {
    if let Some(code) = outcome.error {
        return Err(Failure::state(format!("{what} rejected: {code}")));
    }
    if !outcome.is_valid() {
        return Err(Failure::state(format!("{what} invalidated: {:?}", outcome.validity)));
    }
    Ok(outcome.response)
}

/// Loads the stored network, runs `f` and stores the result, also when `f`
/// fails after committing something.
fn with_network<T>(cli: &Cli, f: impl FnOnce(&Network, &mut SimClock) -> Result<T, Failure>) -> Result<T, Failure> {
    let store = DataDir::new(&cli.data_dir);
    let _lock = store.lock()?;
    let (net, mut clock) = store.load()?;
    clock.advance(COMMAND_STEP_MS);
    let result = f(&net, &mut clock);
    store.save(&net, &clock, cli.events)?;
    result
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Network(NetworkCmd::Init {
            block_size,
            retry_limit,
            admin,
            start,
        }) => {
            let start = parse_time(start).ok_or_else(|| Failure::validation(format!("bad time {start:?}")))?;
            if *block_size == 0 {
                return Err(Failure::validation("block size must be positive"));
            }
            let store = DataDir::new(&cli.data_dir);
            let _lock = store.lock()?;
            let config = LedgerConfig {
                block_size: *block_size,
                retry_limit: *retry_limit,
                admin: admin.clone(),
            };
            store.init(config, SimClock::new(start))?;
            log::info!("initialized {}", store.root().display());
            println!("{BASE_CHANNEL}");
            Ok(())
        }
        Command::Principal(PrincipalCmd::Add { id, kind, org, role }) => with_network(cli, |net, clock| {
            let principal = Principal {
                id: id.clone(),
                kind: (*kind).into(),
                org: org.clone(),
                role: role.clone(),
            };
            net.register_principal(principal, clock)?;
            println!("{id}");
            Ok(())
        }),
        Command::Account(AccountCmd::Fund { channel, owner, amount }) => with_network(cli, |net, clock| {
            let admin = net.config().admin.clone();
            let outcome = net.submit_and_commit(channel, &admin, token::calls::mint(owner, *amount), clock)?;
            let response = require_valid(outcome, "mint")?;
            println!("{owner} balance={}", response["balance"]);
            Ok(())
        }),
        Command::Channel(ChannelCmd::Create { name, org, companies }) => with_network(cli, |net, clock| {
            let name = name.clone().unwrap_or_else(|| format!("{org}-chan"));
            let companies: Vec<&str> = companies.iter().map(String::as_str).collect();
            let spec = net.create_channel(&name, org, &companies, clock)?;
            println!("{}", spec.name);
            Ok(())
        }),
        Command::Contract(ContractCmd::Deploy { channel, conditions }) => {
            let root = parse_condition(conditions.as_deref())?;
            with_network(cli, |net, clock| {
                let org = net.channel_spec(channel)?.organisation;
                let outcome = net.submit_and_commit(channel, &org, access::calls::deploy(&root), clock)?;
                let response = require_valid(outcome, "deploy")?;
                println!("{}", response["node_id"].as_str().unwrap_or_default());
                Ok(())
            })
        }
        Command::Escrow(EscrowCmd::Run(args)) => with_network(cli, |net, clock| {
            let decl = PurchaseDecl {
                channel: args.channel.clone(),
                company: args.company.clone(),
                credits: args.credits,
                ask: args.ask,
                bid: args.bid,
                price_list: args.prices.iter().cloned().collect::<BTreeMap<_, _>>(),
                deposit_tokens: args.tokens,
                deposit_payment: args.payment,
                payment_first: args.payment_first,
            };
            let (_, outcome) = scenario::run_purchase(net, &args.channel, &decl, clock)?;
            println!(
                "{}",
                match outcome {
                    PurchaseOutcome::NotAgreed => "not-agreed",
                    PurchaseOutcome::Released => "released",
                    PurchaseOutcome::RolledBack => "rolled-back",
                }
            );
            Ok(())
        }),
        Command::Access(AccessCmd::Delegate {
            channel,
            parent,
            grantee,
            conditions,
            sub_limit,
            caller,
        }) => {
            let conditions = parse_condition(conditions.as_deref())?;
            with_network(cli, |net, clock| {
                let caller = match caller {
                    Some(c) => c.clone(),
                    None => {
                        let org = net.channel_spec(channel)?.organisation;
                        let node = net.evaluate(channel, &org, &access::calls::node(parent), clock)?;
                        let node: DelegationNode = serde_json::from_value(node)
                            .map_err(|e| Failure::state(format!("bad node record: {e}")))?;
                        node.grantee
                    }
                };
                let invocation = access::calls::delegate(parent, grantee, &conditions, *sub_limit);
                let response = require_valid(net.submit_and_commit(channel, &caller, invocation, clock)?, "delegate")?;
                println!("{}", response["node_id"].as_str().unwrap_or_default());
                Ok(())
            })
        }
        Command::Access(AccessCmd::Revoke { channel, node, caller }) => with_network(cli, |net, clock| {
            let caller = match caller {
                Some(c) => c.clone(),
                None => net.channel_spec(channel)?.organisation,
            };
            let outcome = net.submit_and_commit(channel, &caller, access::calls::revoke(node), clock)?;
            let response = require_valid(outcome, "revoke")?;
            let revoked: Vec<&str> = response["revoked"]
                .as_array()
                .map(|a| a.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            println!("revoked {}", revoked.join(" "));
            Ok(())
        }),
        Command::Trip(TripCmd::Request {
            channel,
            trip_id,
            employee,
            transport_type,
            from,
            to,
            at,
            max_cost,
            company,
            caller,
        }) => with_network(cli, |net, clock| {
            let trip = TripRequest {
                trip_id: trip_id.clone(),
                employee: employee.clone(),
                transport_type: transport_type.clone(),
                origin: *from,
                destination: *to,
                requested_at: parse_at(at.as_deref(), clock)?,
                max_cost: *max_cost,
                company: company.clone(),
            };
            let submitter = caller.as_deref().unwrap_or(employee);
            let outcome = net.submit_and_commit(channel, submitter, access::calls::request_access(&trip), clock)?;
            let response = require_valid(outcome, "request_access")?;
            let decision: Decision =
                serde_json::from_value(response).map_err(|e| Failure::state(format!("bad decision: {e}")))?;
            println!("{decision}");
            Ok(())
        }),
        Command::Trip(TripCmd::Finish {
            channel,
            trip_id,
            actual,
            caller,
        }) => with_network(cli, |net, clock| {
            let caller = match caller {
                Some(c) => c.clone(),
                None => {
                    let org = net.channel_spec(channel)?.organisation;
                    let record = net.evaluate(channel, &org, &access::calls::trip(trip_id), clock)?;
                    let record: TripRecord = serde_json::from_value(record)
                        .map_err(|e| Failure::state(format!("bad trip record: {e}")))?;
                    record.company.unwrap_or_default()
                }
            };
            let outcome = net.submit_and_commit(channel, &caller, access::calls::finish_trip(trip_id, *actual), clock)?;
            let record: TripRecord = serde_json::from_value(require_valid(outcome, "finish_trip")?)
                .map_err(|e| Failure::state(format!("bad trip record: {e}")))?;
            println!(
                "finished {trip_id} actual={actual} refund={}",
                record.trip.max_cost - record.actual_cost.unwrap_or(0)
            );
            Ok(())
        }),
        Command::Ledger(LedgerCmd::Export { channel, out }) => {
            let store = DataDir::new(&cli.data_dir);
            let _lock = store.lock()?;
            let path = store.ledger_path(channel);
            let bytes = fs::read(&path).map_err(|_| Failure::state(format!("unknown-channel: no log for {channel}")))?;
            match out {
                Some(rel) => write_file(&confined(store.root(), rel)?, &bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
            Ok(())
        }
        Command::Ledger(LedgerCmd::Verify { channel }) => {
            let store = DataDir::new(&cli.data_dir);
            let _lock = store.lock()?;
            let channels = match channel {
                Some(c) => vec![c.clone()],
                None => store.stored_channels()?,
            };
            if channels.is_empty() {
                return Err(Failure::state("no block logs to verify"));
            }
            for name in &channels {
                match store.verify_channel(name) {
                    Ok(hash) => {
                        log::info!("{name}: {hash}");
                        if channels.len() == 1 {
                            println!("OK {hash}");
                        } else {
                            println!("OK {hash} {name}");
                        }
                    }
                    Err(e) if e.is_verification_failure() => {
                        println!("FAIL {}", e.code());
                        eprintln!("{name}: {e}");
                        return Err(Failure {
                            code: 4,
                            message: format!("{name}: verification failed"),
                        });
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(())
        }
        Command::Scenario(ScenarioCmd::Run { file, seed, name }) => {
            let text = fs::read_to_string(file).map_err(|e| Failure::state(format!("{}: {e}", file.display())))?;
            let mut scenario = Scenario::from_json(&text)?;
            if let Some(seed) = seed {
                scenario.seed = *seed;
            }
            let dir_name = name.clone().unwrap_or_else(|| {
                if scenario.name.is_empty() {
                    file.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned())
                } else {
                    scenario.name.clone()
                }
            });
            let store = DataDir::new(&cli.data_dir);
            let _lock = store.lock()?;
            let out = confined(store.root(), &Path::new("scenarios").join(&dir_name))?;
            if out.exists() {
                fs::remove_dir_all(&out).map_err(|e| Failure::state(format!("{}: {e}", out.display())))?;
            }
            let run = scenario::run_scenario(&scenario)?;
            let target = DataDir::new(&out);
            target.save(&run.network, &run.clock, true)?;
            let summary = serde_json::to_string_pretty(&run.summary(&scenario)).expect("summary serializes") + "\n";
            write_file(&out.join("summary.json"), summary.as_bytes())?;
            log::info!("summary written to {}", out.join("summary.json").display());
            println!("{}", run.network_hash());
            Ok(())
        }
        Command::Bench(BenchCmd::Run {
            config,
            rates,
            reps,
            tx_per_round,
            capacity,
            seed,
            name,
        }) => {
            let mut cfg = match config {
                Some(path) => {
                    let text =
                        fs::read_to_string(path).map_err(|e| Failure::state(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<WorkloadConfig>(&text).map_err(|e| {
                        Failure::validation(format!(
                            "line {}, column {}: {}",
                            e.line(),
                            e.column(),
                            scenario::strip_position(e.to_string())
                        ))
                    })?
                }
                None => WorkloadConfig::default(),
            };
            if let Some(r) = rates {
                cfg.send_rates = r.clone();
            }
            if let Some(r) = reps {
                cfg.repetitions = *r;
            }
            if let Some(n) = tx_per_round {
                cfg.tx_per_round = *n;
            }
            if let Some(c) = capacity {
                cfg.committer_capacity = *c;
            }
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            cfg.validate()?;
            let store = DataDir::new(&cli.data_dir);
            let _lock = store.lock()?;
            let out = confined(store.root(), &Path::new("bench").join(name))?;
            let report = bench::run_suite_with(&cfg, |m| {
                log::info!(
                    "rate {} rep {}: {:.1} tps, {:.3} s mean latency",
                    m.send_rate,
                    m.repetition,
                    m.throughput,
                    m.latency_avg
                )
            })?;
            bench::write_outputs(&report, &out)?;
            print!("{}", report.table());
            println!("{} rounds written to {}", report.rounds.len(), out.join("metrics.csv").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
