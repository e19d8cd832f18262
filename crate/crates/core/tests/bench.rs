use credchain::bench::{generate_workload, run_round, run_suite, BenchError, TxType, WorkloadConfig};

fn small(rates: &[f64]) -> WorkloadConfig {
    WorkloadConfig {
        send_rates: rates.to_vec(),
        tx_per_round: 4_000,
        repetitions: 1,
        ..WorkloadConfig::default()
    }
}

fn within(value: f64, target: f64, tolerance: f64) -> bool {
    (value - target).abs() <= tolerance * target
}

#[test]
fn workload_arithmetic() {
    let config = WorkloadConfig {
        tx_per_round: 1_000,
        ..WorkloadConfig::default()
    };
    let w = generate_workload(&config, 100.0, 1).unwrap();
    assert_eq!(w.requests[1].offset_ms - w.requests[0].offset_ms, 10.0);
    assert!(w.requests.len().abs_diff(w.finishes.len()) <= 1);
    assert_eq!(w.requests.len() + w.finishes.len(), 1_000);
    let again = generate_workload(&config, 100.0, 1).unwrap();
    assert_eq!(serde_json::to_vec(&w).unwrap(), serde_json::to_vec(&again).unwrap());
    assert_ne!(w, generate_workload(&config, 100.0, 2).unwrap());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        WorkloadConfig { send_rates: vec![200.0, 100.0], ..Default::default() },
        WorkloadConfig { send_rates: vec![], ..Default::default() },
        WorkloadConfig { mix: 1.5, ..Default::default() },
        WorkloadConfig { committer_capacity: 0.0, ..Default::default() },
        WorkloadConfig { tx_per_round: 0, ..Default::default() },
    ];
    for config in bad {
        assert!(matches!(run_suite(&config), Err(BenchError::ConfigInvalid(_))), "{config:?}");
    }
}

#[test]
fn saturation_and_latency_shape() {
    let config = small(&[100.0, 150.0, 210.0, 250.0, 300.0]);
    let report = run_suite(&config).unwrap();
    assert_eq!(report.rounds.len(), 5);
    let capacity = config.committer_capacity;
    let mut last_latency = 0.0;
    for round in &report.rounds {
        let rate = round.send_rate;
        if rate <= 0.9 * capacity {
            assert!(within(round.throughput, rate, 0.05), "{rate}: {}", round.throughput);
        }
        if rate >= 1.2 * capacity {
            assert!(within(round.throughput, capacity, 0.05), "{rate}: {}", round.throughput);
        }
        assert!(round.throughput <= rate * 1.0001 && round.throughput <= capacity * 1.0001);
        assert!(round.latency_avg >= last_latency, "latency fell at {rate}");
        last_latency = round.latency_avg;
        for ty in TxType::ALL {
            let m = round.of(ty);
            assert!(m.throughput <= rate * 1.0001 && m.throughput <= config.saturation_tps(ty) * 1.0001);
            assert!(m.latency_avg >= 0.0 && m.latency_avg <= m.latency_p95.max(m.latency_avg));
            assert!(m.latency_p95 <= m.latency_max);
            assert_eq!(m.valid + m.failed + m.conflicts, m.submitted);
        }
    }
    assert_eq!(report.summary().len(), 5 * 3);
    assert_eq!(report.to_csv().lines().count(), 1 + 5 * 2);
}

#[test]
fn littles_law_on_stable_rounds() {
    let config = small(&[80.0, 120.0]);
    for &rate in &config.send_rates {
        let w = generate_workload(&config, rate, config.seed).unwrap();
        let round = run_round(&config, &w, 0).unwrap();
        for ty in TxType::ALL {
            let m = round.of(ty);
            assert!(rate <= 0.9 * config.saturation_tps(ty));
            let predicted = rate * m.latency_avg;
            assert!(within(m.mean_queue, predicted, 0.10), "{ty} at {rate}: {} vs {predicted}", m.mean_queue);
        }
    }
}

#[test]
fn costlier_requests_saturate_lower() {
    let config = small(&[300.0]);
    let w = generate_workload(&config, 300.0, config.seed).unwrap();
    let round = run_round(&config, &w, 0).unwrap();
    assert!(round.request_access.throughput < round.finish_trip.throughput);
    // Equal costs remove the gap.
    let even = WorkloadConfig {
        request_cost: 1.0,
        ..config.clone()
    };
    let round = run_round(&even, &w, 0).unwrap();
    assert!(within(round.request_access.throughput, round.finish_trip.throughput, 0.05));
}

#[test]
fn capacity_rate_keeps_a_bounded_queue() {
    let config = WorkloadConfig {
        mix: 1.0,
        ..small(&[1.0])
    };
    let rate = config.saturation_tps(TxType::RequestAccess);
    let w = generate_workload(&config, rate, 3).unwrap();
    let round = run_round(&config, &w, 0).unwrap();
    // At exactly capacity the backlog stays within a few blocks.
    assert!(round.request_access.mean_queue < 4.0 * config.block_size as f64);
    assert!(round.request_access.latency_max < 2.0);
}
