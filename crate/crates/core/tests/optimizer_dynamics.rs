mod common;

use aggropt_core::estimators::aggregate_stats;
use aggropt_core::optimizer::{optimize, optimize_baseline};
use aggropt_core::{
    BaselineObjective, Criterion, LoggedDataset, LoggedRecord, OptimizerConfig, SampleCountMode,
    SoftmaxPolicy,
};

/// Two actions logged uniformly, 10 times each; action 1 always pays 1.
fn two_action_dataset(reward: f64) -> LoggedDataset {
    let records = (0..20)
        .map(|i| LoggedRecord {
            context: 0,
            action: i % 2,
            reward: if i % 2 == 1 { reward } else { 0.0 },
            propensity: 0.5,
        })
        .collect();
    LoggedDataset::new(records, SampleCountMode::PoissonN)
}

fn sigmoid(d: f64) -> f64 {
    1.0 / (1.0 + (-d).exp())
}

fn p1(policy: &SoftmaxPolicy) -> f64 {
    policy.probability(0, 1).unwrap()
}

/// Expected-update iterate of the logit gap `d = θ_1 − θ_0` when ascending
/// `c · π_1`: each step moves `θ_1` by `η c π_1(1 − π_1)` and `θ_0` by the
/// negative of that.
fn oracle_gap(c: f64, eta: f64, steps: usize) -> Vec<f64> {
    let mut d = 0.0;
    let mut out = vec![d];
    for _ in 0..steps {
        let p = sigmoid(d);
        d += 2.0 * eta * c * p * (1.0 - p);
        out.push(d);
    }
    out
}

#[test]
fn identity_criterion_follows_expected_two_action_dynamics() {
    let ds = two_action_dataset(1.0);
    let uniform = SoftmaxPolicy::uniform(1, 2).unwrap();
    let steps = 60;
    let config = OptimizerConfig {
        learning_rate: 0.05,
        gaussian_samples: 20_000,
        iterations: steps,
        control_variate: true,
        seed: 11,
        ..Default::default()
    };
    // μ = Σ π_1/0.5 over ten rewarded records = 20 π_1
    let oracle = oracle_gap(20.0, config.learning_rate, steps);
    let mut previous = 0.5;
    for k in 1..=steps {
        let (policy, _) = optimize(
            &ds,
            &uniform,
            &Criterion::Identity,
            &OptimizerConfig { iterations: k, ..config.clone() },
        )
        .unwrap();
        let p = p1(&policy);
        assert!(p > previous, "step {k}: {p} <= {previous}");
        assert!((p - sigmoid(oracle[k])).abs() < 0.01, "step {k}: {p} vs {}", sigmoid(oracle[k]));
        previous = p;
    }
    assert!(previous > 0.9);
}

#[test]
fn ips_ascent_matches_oracle_and_becomes_deterministic() {
    let ds = two_action_dataset(1.0);
    let uniform = SoftmaxPolicy::uniform(1, 2).unwrap();
    let config = OptimizerConfig {
        learning_rate: 5.0,
        iterations: 2000,
        ..Default::default()
    };
    let (policy, trace) = optimize_baseline(&ds, &uniform, BaselineObjective::Ips, &config).unwrap();
    // IPS value = (1/20) · 20 π_1
    let oracle = oracle_gap(1.0, config.learning_rate, config.iterations);
    assert!((p1(&policy) - sigmoid(oracle[config.iterations])).abs() < 1e-9);
    assert!(policy.mean_entropy() < 0.05);
    assert_eq!(trace.len(), 2000);
    for (k, r) in trace.records.iter().enumerate() {
        assert_eq!(r.iter, k);
        assert!((r.j_hat - sigmoid(oracle[k])).abs() < 1e-9);
    }
}

#[test]
fn ls_at_zero_lambda_retraces_ips() {
    let inst = common::random_instance(9, 5, 20, SampleCountMode::PoissonN);
    let config = OptimizerConfig {
        learning_rate: 2.0,
        ..Default::default()
    };
    for k in 1..=15 {
        let c = OptimizerConfig { iterations: k, ..config.clone() };
        let (a, _) = optimize_baseline(&inst.dataset, &inst.policy, BaselineObjective::Ips, &c).unwrap();
        let (b, _) =
            optimize_baseline(&inst.dataset, &inst.policy, BaselineObjective::Ls { lambda: 0.0 }, &c)
                .unwrap();
        for (x, y) in a.theta().iter().zip(b.theta()) {
            assert!((x - y).abs() <= 1e-10, "step {k}: {x} vs {y}");
        }
    }
}

#[test]
fn zero_rewards_leave_parameters_unchanged() {
    let ds = two_action_dataset(0.0);
    let start = SoftmaxPolicy::from_logits(vec![0.3, -0.2]).unwrap();
    let config = OptimizerConfig {
        learning_rate: 10.0,
        iterations: 50,
        ..Default::default()
    };
    for objective in [BaselineObjective::Ips, BaselineObjective::Ls { lambda: 0.5 }] {
        let (p, _) = optimize_baseline(&ds, &start, objective, &config).unwrap();
        assert_eq!(p.theta(), start.theta());
    }
    let (p, _) = optimize(&ds, &start, &Criterion::threshold(1.0).unwrap(), &config).unwrap();
    assert_eq!(p.theta(), start.theta());
}

#[test]
fn saturated_threshold_barely_moves() {
    let inst = common::random_instance(21, 5, 20, SampleCountMode::PoissonN);
    let stats = aggregate_stats(&inst.dataset, &inst.policy).unwrap();
    let sigma = stats.sigma_sq.sqrt();
    let far_below = Criterion::threshold(stats.mu - 40.0 * sigma).unwrap();
    let at_mean = Criterion::threshold(stats.mu).unwrap();
    let config = OptimizerConfig {
        learning_rate: 0.1,
        iterations: 50,
        gaussian_samples: 20_000,
        ..Default::default()
    };
    let (_, trace) = optimize(&inst.dataset, &inst.policy, &far_below, &config).unwrap();
    let (_, active) = optimize(&inst.dataset, &inst.policy, &at_mean, &config).unwrap();
    let active_norm = active.records[0].grad_norm;
    for r in &trace.records {
        assert_eq!(r.j_hat, 1.0);
        // only the zero-mean score remains, ~1/√m of the active gradient
        assert!(r.grad_norm < 0.2 * active_norm, "{} vs {active_norm}", r.grad_norm);
    }

    let with_cv = OptimizerConfig { control_variate: true, ..config };
    let (p, trace) = optimize(&inst.dataset, &inst.policy, &far_below, &with_cv).unwrap();
    assert!(trace.records.iter().all(|r| r.grad_norm == 0.0));
    assert_eq!(p.theta(), inst.policy.theta());
}

#[test]
fn runs_are_deterministic_given_seed() {
    let inst = common::random_instance(5, 5, 20, SampleCountMode::FixedN);
    let stats = aggregate_stats(&inst.dataset, &inst.policy).unwrap();
    let criterion = Criterion::threshold(stats.mu * 1.2).unwrap();
    let config = OptimizerConfig {
        learning_rate: 0.5,
        iterations: 100,
        gaussian_samples: 200,
        variance_mode: SampleCountMode::FixedN,
        seed: 99,
        ..Default::default()
    };
    let (pa, ta) = optimize(&inst.dataset, &inst.policy, &criterion, &config).unwrap();
    let (pb, tb) = optimize(&inst.dataset, &inst.policy, &criterion, &config).unwrap();
    assert_eq!(pa, pb);
    assert_eq!(ta, tb);
    let (pc, _) = optimize(
        &inst.dataset,
        &inst.policy,
        &criterion,
        &OptimizerConfig { seed: 100, ..config },
    )
    .unwrap();
    assert_ne!(pa, pc);
}

#[test]
fn power_criterion_ascent_increases_smoothed_objective() {
    let inst = common::random_instance(13, 5, 40, SampleCountMode::PoissonN);
    let sqrt = Criterion::power(0.5).unwrap();
    let config = OptimizerConfig {
        learning_rate: 0.2,
        iterations: 100,
        gaussian_samples: 5000,
        control_variate: true,
        ..Default::default()
    };
    let (p, _) = optimize(&inst.dataset, &inst.policy, &sqrt, &config).unwrap();
    let before = aggregate_stats(&inst.dataset, &inst.policy).unwrap();
    let after = aggregate_stats(&inst.dataset, &p).unwrap();
    let j = |s: &aggropt_core::AggregateStats| sqrt.gaussian_expectation(s.mu, s.sigma_sq).unwrap();
    assert!(j(&after) > j(&before));
}
