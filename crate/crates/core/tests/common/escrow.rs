//! Randomized escrow runs: deposits in varying order and block placement,
//! mismatched amounts, and unrelated calls mixed into the same blocks.

use credchain::contract::Invocation;
use credchain::ledger::{LedgerConfig, Network, Validity};
use credchain::token::{self, Phase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{network, ok, proposal, CH, COMPANY, ORG};

pub const ORG_FUNDS: u64 = 1_000;
pub const COMPANY_FUNDS: u64 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    TokensFirst,
    PaymentFirst,
    /// Both deposits executed against the same snapshot and ordered into one
    /// block; the later one conflicts and is resubmitted.
    SameBlock { tokens_first: bool },
}

#[derive(Clone, Copy, Debug)]
pub enum Noise {
    CompanyPays(u64),
    OrgDepositsTokens(u64),
    ExtraTokens(u64),
    Release,
    Mint(u64),
}

#[derive(Clone, Debug)]
pub struct EscrowPlan {
    pub credits: u64,
    pub price: u64,
    pub tokens: u64,
    pub payment: u64,
    pub order: Order,
    /// Extra calls and the stage (0 or 1) they are mixed into.
    pub noise: Vec<(usize, Noise)>,
    pub block_size: usize,
}

impl EscrowPlan {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let credits = rng.gen_range(1..=2_000);
        let price = rng.gen_range(1..=ORG_FUNDS);
        // Matching amounts half the time.
        let tokens = if rng.gen_bool(0.5) { credits } else { rng.gen_range(0..=2_000) };
        let payment = if rng.gen_bool(0.5) { price } else { rng.gen_range(0..=ORG_FUNDS) };
        let order = match rng.gen_range(0..4) {
            0 => Order::TokensFirst,
            1 => Order::PaymentFirst,
            n => Order::SameBlock { tokens_first: n == 2 },
        };
        let noise = (0..rng.gen_range(0..4))
            .map(|_| {
                let n = match rng.gen_range(0..5) {
                    0 => Noise::CompanyPays(rng.gen_range(0..=COMPANY_FUNDS)),
                    1 => Noise::OrgDepositsTokens(rng.gen_range(0..=2_000)),
                    2 => Noise::ExtraTokens(rng.gen_range(0..=2_000)),
                    3 => Noise::Release,
                    _ => Noise::Mint(rng.gen_range(1..50)),
                };
                (rng.gen_range(0..2), n)
            })
            .collect();
        Self {
            credits,
            price,
            tokens,
            payment,
            order,
            noise,
            block_size: rng.gen_range(1..=4),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EscrowResult {
    pub phase: Phase,
    pub blocks: usize,
}

struct Balances {
    org: u64,
    company: u64,
    credited: u64,
    escrowed: u64,
    total: u64,
    minted: u64,
}

fn balances(net: &Network) -> Balances {
    let state = net.state(CH).unwrap();
    Balances {
        org: token::view::account(&state, ORG),
        company: token::view::account(&state, COMPANY),
        credited: token::view::pool(&state, COMPANY).credited,
        escrowed: token::view::escrow(&state, COMPANY).map_or(0, |e| e.escrowed_payment),
        total: token::view::total_currency(&state),
        minted: token::view::minted(&state),
    }
}

/// Checks that hold after every commit, whatever the phase.
fn check_partial(b: &Balances, plan: &EscrowPlan) -> Result<(), String> {
    if b.total != b.minted {
        return Err(format!("currency {} != minted {}", b.total, b.minted));
    }
    let company_gain = b.company as i64 - COMPANY_FUNDS as i64;
    let paid = b.credited > 0;
    if paid != (company_gain > 0) {
        return Err(format!(
            "one-sided state: company gained {company_gain}, pool credited {}",
            b.credited
        ));
    }
    if paid && (company_gain != plan.price as i64 || b.credited != plan.credits) {
        return Err(format!("partial release: gain {company_gain}, credited {}", b.credited));
    }
    Ok(())
}

fn noise_call(noise: Noise, admin: &str) -> (String, Invocation) {
    match noise {
        Noise::CompanyPays(n) => (COMPANY.into(), token::calls::deposit_payment(COMPANY, n)),
        Noise::OrgDepositsTokens(n) => (ORG.into(), token::calls::deposit_tokens(COMPANY, n)),
        Noise::ExtraTokens(n) => (COMPANY.into(), token::calls::deposit_tokens(COMPANY, n)),
        Noise::Release => (COMPANY.into(), token::calls::try_release(COMPANY)),
        // Minting to a third party touches only unrelated accounts.
        Noise::Mint(n) => (admin.into(), token::calls::mint("bystander", n)),
    }
}

/// Runs one plan to a terminal phase and checks conservation after every
/// block and exact outcomes at the end.
pub fn run_escrow_plan(plan: &EscrowPlan) -> Result<EscrowResult, String> {
    let config = LedgerConfig {
        block_size: plan.block_size,
        ..LedgerConfig::default()
    };
    let (net, mut clock) = network(config, ORG_FUNDS);
    let admin = net.config().admin.clone();
    ok(net.submit_and_commit(CH, &admin, token::calls::mint(COMPANY, COMPANY_FUNDS), &clock).unwrap());
    ok(net
        .submit_and_commit(CH, COMPANY, token::calls::init(&proposal(plan.credits, plan.price)), &clock)
        .unwrap());
    let start_height = net.blocks(CH).unwrap().len();

    let tokens = (COMPANY.to_string(), token::calls::deposit_tokens(COMPANY, plan.tokens));
    let payment = (ORG.to_string(), token::calls::deposit_payment(COMPANY, plan.payment));
    let stages: Vec<Vec<(String, Invocation)>> = match plan.order {
        Order::TokensFirst => vec![vec![tokens], vec![payment]],
        Order::PaymentFirst => vec![vec![payment], vec![tokens]],
        Order::SameBlock { tokens_first: true } => vec![vec![tokens, payment]],
        Order::SameBlock { tokens_first: false } => vec![vec![payment, tokens]],
    };
    let stage_count = stages.len();
    for (stage_no, stage) in stages.into_iter().enumerate() {
        let mut pending = stage;
        for attempt in 0..6 {
            if pending.is_empty() {
                break;
            }
            let mut batch: Vec<(String, Invocation, bool)> = Vec::new();
            if attempt == 0 {
                for (s, n) in &plan.noise {
                    if (*s).min(stage_count - 1) == stage_no {
                        let (who, inv) = noise_call(*n, &admin);
                        batch.push((who, inv, false));
                    }
                }
            }
            // Deposits go after the noise on even stages and before it on odd ones.
            let deposits = pending.drain(..).map(|(w, i)| (w, i, true));
            if stage_no % 2 == 0 {
                batch.extend(deposits);
            } else {
                let noise = std::mem::take(&mut batch);
                batch.extend(deposits);
                batch.extend(noise);
            }
            let mut submitted = Vec::new();
            for (who, inv, required) in batch {
                let id = net.submit(CH, &who, inv.clone(), &clock).unwrap();
                submitted.push((id, who, inv, required));
            }
            clock.advance(1_000);
            net.drain(CH, &clock).unwrap();
            check_partial(&balances(&net), plan)?;
            for (id, who, inv, required) in submitted {
                let record = net.transaction(CH, &id).unwrap().expect("committed");
                if required && record.validity == Validity::MvccConflict {
                    pending.push((who, inv));
                }
            }
        }
    }

    // The amounts that actually landed decide the outcome.
    let blocks = net.blocks(CH).unwrap();
    let landed = |op: &str| {
        blocks[start_height..]
            .iter()
            .flat_map(|b| &b.transactions)
            .find(|tx| tx.validity == Validity::Valid && tx.invocation.operation == op)
            .map(|tx| tx.invocation.args["amount"].as_u64().unwrap())
    };
    let (Some(tokens), Some(payment)) = (landed("deposit_tokens"), landed("deposit_payment")) else {
        return Err("a deposit never landed".into());
    };
    let state = net.state(CH).unwrap();
    let escrow = token::view::escrow(&state, COMPANY).ok_or("escrow missing")?;
    let b = balances(&net);
    let expect_release = tokens == plan.credits && payment == plan.price;
    match escrow.phase {
        Phase::Released if expect_release => {
            if b.company != COMPANY_FUNDS + plan.price || b.org != ORG_FUNDS - plan.price || b.credited != plan.credits {
                return Err("released with wrong balances".into());
            }
        }
        Phase::RolledBack if !expect_release => {
            if b.company != COMPANY_FUNDS || b.org != ORG_FUNDS || b.credited != 0 {
                return Err("rolled back with changed balances".into());
            }
        }
        other => return Err(format!("ended in {other:?} with tokens {tokens}, payment {payment}")),
    }
    if b.escrowed != 0 || escrow.escrowed_tokens != 0 {
        return Err("terminal escrow still holds deposits".into());
    }
    let events: Vec<String> = net.events(CH).unwrap().into_iter().map(|e| e.name).collect();
    let expected = if expect_release { "token-released" } else { "escrow-rolled-back" };
    if events.iter().filter(|e| e.starts_with("token-released") || e.starts_with("escrow-")).collect::<Vec<_>>()
        != [expected]
    {
        return Err(format!("events {events:?}"));
    }
    Ok(EscrowResult {
        phase: escrow.phase,
        blocks: blocks.len(),
    })
}
