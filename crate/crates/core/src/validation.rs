//! The formula-vs-simulation cross-validation matrix.
//!
//! Each check pins an analytic result to a measurable quantity at an
//! explicit tolerance: measured Bloom false-positive rates against the
//! closed form, Monte-Carlo reward splitting against the reward
//! coefficient, full protocol simulations against the utilization /
//! throughput / revenue formulas, the equilibrium certificate, the flood
//! detector's two-sided guarantees, and the delay-attack expectation.
//!
//! The `tolerance_scale` knob multiplies every tolerance width: 1.0 is
//! the reference profile; small values tighten the bands until honest
//! statistical noise fails, which is the expected outcome there.

use crate::analytics;
use crate::bloom::{self, BloomFilter, FloodPolicy, Validation};
use crate::metrics;
use crate::numeric::phi;
use crate::protocol::TxId;
use crate::sim::oracles;
use crate::sim::trace::{BlockKind, EventKind};
use crate::sim::{
    run_simulation, Protocol, SimConfig, StrategyKind,
};
use crate::strategies::{
    best_response, equilibrium_strategy, expected_revenue, strategy_random, strategy_top_n,
};
use std::time::Instant;

/// Default master seed of the reference validation profile.
pub const DEFAULT_SEED: u64 = 8_151_623;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "{} {:<28} {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

/// All check names, in execution order.
pub const CHECK_NAMES: &[&str] = &[
    "bloom-empirical-fpr",
    "reward-coefficient-mc",
    "utilization-standard",
    "utilization-tips",
    "throughput-trend",
    "equilibrium-certificate",
    "dilemma-limits",
    "revenue-trend",
    "revenue-formula",
    "fsr-identity",
    "confirmation-ordering",
    "flood-defense",
    "delay-attack",
    "throughput-limit-statement",
];

/// Run every check whose name contains `filter` (all when `None`).
pub fn run_matrix(filter: Option<&str>, tolerance_scale: f64, seed: u64) -> Vec<CheckResult> {
    CHECK_NAMES
        .iter()
        .filter(|name| filter.is_none_or(|f| name.contains(f)))
        .map(|name| run_check(name, tolerance_scale, seed))
        .collect()
}

/// Run one named check.
pub fn run_check(name: &str, tolerance_scale: f64, seed: u64) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = match name {
        "bloom-empirical-fpr" => bloom_empirical_fpr(tolerance_scale, seed),
        "reward-coefficient-mc" => reward_coefficient_mc(tolerance_scale, seed),
        "utilization-standard" => utilization_standard(tolerance_scale, seed),
        "utilization-tips" => utilization_tips(tolerance_scale, seed),
        "throughput-trend" => throughput_trend(seed),
        "equilibrium-certificate" => equilibrium_certificate(tolerance_scale, seed),
        "dilemma-limits" => dilemma_limits(tolerance_scale, seed),
        "revenue-trend" => revenue_trend(seed),
        "revenue-formula" => revenue_formula(tolerance_scale, seed),
        "fsr-identity" => fsr_identity(tolerance_scale, seed),
        "confirmation-ordering" => confirmation_ordering(tolerance_scale, seed),
        "flood-defense" => flood_defense(tolerance_scale, seed),
        "delay-attack" => delay_attack(tolerance_scale, seed),
        "throughput-limit-statement" => throughput_limit_statement(),
        other => (false, format!("unknown check '{other}'")),
    };
    let name = CHECK_NAMES
        .iter()
        .find(|n| **n == name)
        .copied()
        .unwrap_or("unknown");
    CheckResult { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Descending order-statistic means of U[0,1], the reference fee profile.
pub fn uniform_fee_profile(m: usize) -> Vec<f64> {
    (0..m).map(|i| (m - i) as f64 / m as f64 - 0.5 / m as f64).collect()
}

/// Reference experiment config mirroring the headline setup: 10 miners,
/// 2000-transaction blocks, a 10000-transaction pool, a 10 s body delay
/// and a 0.1 s signal delay.
pub fn paper_scale_config(
    seed: u64,
    protocol: Protocol,
    strategy: StrategyKind,
    lambda: f64,
    horizon: f64,
) -> SimConfig {
    let mut c = SimConfig::default_with_seed(seed);
    c.protocol = protocol;
    c.strategy = strategy;
    c.lambda = lambda;
    c.horizon = horizon;
    c.tx_rate = (1.3 * lambda * c.n as f64).max(50.0);
    c
}

/// Reduced-size config for sweeps where only scale-free quantities are
/// asserted (utilization trends, revenue orderings).
fn desk_scale_config(
    seed: u64,
    protocol: Protocol,
    strategy: StrategyKind,
    lambda: f64,
    blocks: f64,
) -> SimConfig {
    let mut c = SimConfig::default_with_seed(seed);
    c.protocol = protocol;
    c.strategy = strategy;
    c.lambda = lambda;
    c.n = 500;
    c.m = 2500;
    c.bloom_bits = 5000;
    c.bloom_hashes = 5;
    c.horizon = blocks / lambda;
    c.tx_rate = (2.0 * lambda * c.n as f64).max(25.0);
    c
}

// --- criterion 1 -----------------------------------------------------

fn bloom_empirical_fpr(scale: f64, seed: u64) -> (bool, String) {
    let (b, h, inserts) = (20_000u32, 5u8, 2500u64);
    let mut filter = BloomFilter::new(b, h).expect("valid dims");
    for i in 0..inserts {
        filter.insert(&TxId::from_index(i, seed));
    }
    let probes = 1_000_000u64;
    let mut hits = 0u64;
    for i in 0..probes {
        if filter.contains(&TxId::from_index(inserts + i, seed)) {
            hits += 1;
        }
    }
    let rate = hits as f64 / probes as f64;
    let target = 0.0217;
    let tol = 0.003 * scale;
    let passed = (rate - target).abs() <= tol;
    (passed, format!("empirical fpr {rate:.5} vs {target} +- {tol:.5}"))
}

// --- criterion 2 -----------------------------------------------------

fn reward_coefficient_mc(scale: f64, seed: u64) -> (bool, String) {
    let episodes = 300_000;
    let lambda = 0.5;
    let mut worst: f64 = 0.0;
    for (pi, &p) in [0.05, 0.2, 0.5, 0.8, 1.0].iter().enumerate() {
        for (di, &a) in [0.1, 1.0, 5.0, 10.0].iter().enumerate() {
            let delay = a / lambda;
            let mc = oracles::split_reward_coefficient_mc(
                p,
                lambda,
                delay,
                episodes,
                seed ^ ((pi as u64) << 8) ^ (di as u64),
            );
            let exact = phi(a * p);
            worst = worst.max((mc - exact).abs() / exact);
        }
    }
    let tol = 0.01 * scale;
    (worst <= tol, format!("worst relative error {worst:.5} over 20 grid points (tol {tol:.5})"))
}

// --- criterion 3 -----------------------------------------------------

fn utilization_standard(scale: f64, seed: u64) -> (bool, String) {
    // The closed form idealizes infinitely many miners (no miner mines
    // the same transaction twice) and a sharp propagation window, so
    // this check runs 50 miners with low delay jitter; arrivals sit at
    // the unique-inclusion capacity so blocks never displace in-flight
    // transactions from the fee ranking.
    let mut config =
        paper_scale_config(seed, Protocol::Standard, StrategyKind::TopN, 0.5, 9000.0);
    config.num_miners = 100;
    config.delta_stddev = 0.1;
    config.tx_rate = 150.0;
    let trace = run_simulation(&config).expect("valid config");
    let s = metrics::summarize(&trace).expect("non-empty run");
    let u_target = 1.0 / 6.0;
    let tps_target = 1000.0 / 6.0;
    let (u_tol, tps_tol) = (0.02 * scale, 20.0 * scale);
    let passed =
        (s.utilization - u_target).abs() <= u_tol && (s.tps - tps_target).abs() <= tps_tol;
    (
        passed,
        format!(
            "U {:.4} vs {:.4} +- {:.3}; TPS {:.1} vs {:.1} +- {:.1} ({} blocks)",
            s.utilization, u_target, u_tol, s.tps, tps_target, tps_tol, s.blocks
        ),
    )
}

fn utilization_tips(scale: f64, seed: u64) -> (bool, String) {
    // Arrivals well above capacity: pool eviction then flushes signaled
    // (already claimed) entries promptly, the intended steady state when
    // the in-flight volume lambda*delta*n is as large as the pool.
    let mut config = paper_scale_config(seed, Protocol::Tips, StrategyKind::TopN, 0.5, 4200.0);
    config.tx_rate = 2500.0;
    let trace = run_simulation(&config).expect("valid config");
    let s = metrics::summarize(&trace).expect("non-empty run");
    // One-sided floors at reference scale; tightening shrinks the slack
    // below the analytic ceiling 1/(lambda tau + 1).
    let u_floor = 1.0 - 0.10 * scale.min(10.0);
    let tps_floor = 1000.0 - 150.0 * scale.min(6.0);
    // Signal-driven suppression keeps late duplicates near the false
    // positive rate; allow 3 binomial sigmas above epsilon.
    let late = metrics::late_duplicate_rate(&trace, 2.0 * config.tau_mean + 3.0 * config.tau_stddev)
        .expect("non-empty");
    let slots = (s.blocks as f64) * s.mean_block_fill;
    let late_cap = trace.epsilon + 3.0 * (trace.epsilon / slots).sqrt() + 1e-3 * scale;
    let passed = s.utilization >= u_floor && s.tps >= tps_floor && late <= late_cap;
    (
        passed,
        format!(
            "U {:.4} (floor {:.4}); TPS {:.1} (floor {:.1}); late-dup {:.5} (cap {:.5})",
            s.utilization, u_floor, s.tps, tps_floor, late, late_cap
        ),
    )
}

fn throughput_trend(seed: u64) -> (bool, String) {
    let mut failures = Vec::new();
    for i in 1..=10u32 {
        let lambda = i as f64 / 10.0;
        let run = |protocol| {
            let config =
                desk_scale_config(seed + i as u64, protocol, StrategyKind::TopN, lambda, 400.0);
            let trace = run_simulation(&config).expect("valid config");
            metrics::summarize(&trace).expect("non-empty run")
        };
        let std = run(Protocol::Standard);
        let tips = run(Protocol::Tips);
        if !(tips.utilization > std.utilization && tips.tps > std.tps) {
            failures.push(format!(
                "lambda {lambda}: tips U {:.3}/TPS {:.1} vs std {:.3}/{:.1}",
                tips.utilization, tips.tps, std.utilization, std.tps
            ));
        }
    }
    if failures.is_empty() {
        (true, "signaling beats standard in U and TPS at all 10 rates (paired seeds)".into())
    } else {
        (false, failures.join("; "))
    }
}

// --- criterion 4 -----------------------------------------------------

fn equilibrium_certificate(scale: f64, seed: u64) -> (bool, String) {
    let mut rng = crate::sim::rng::Stream::new(seed, &[crate::sim::rng::label::ORACLE, 40]);
    let (m, n) = (200, 40);
    let mut worst_gain: f64 = 0.0;
    for case in 0..50 {
        let mut fees: Vec<f64> = (0..m).map(|_| 0.02 + 0.98 * rng.uniform()).collect();
        fees.sort_unstable_by(|a, b| b.total_cmp(a));
        let lambda = 0.5;
        let delay = [0.5, 2.0, 6.0, 20.0][case % 4];
        let sol = equilibrium_strategy(&fees, n, lambda, delay).expect("solvable");
        let own = expected_revenue(&sol.strategy, &sol.strategy, &fees, lambda, delay)
            .expect("lengths match");
        let (best, _) = best_response(&sol.strategy, &fees, lambda, delay).expect("lengths match");
        worst_gain = worst_gain.max((best - own) / own);
    }
    // Homogeneous fees must return the uniform strategy near-exactly.
    let flat = vec![0.37; m];
    let sol = equilibrium_strategy(&flat, n, 0.5, 10.0).expect("solvable");
    let uniform_err = sol
        .strategy
        .probabilities()
        .iter()
        .map(|p| (p - n as f64 / m as f64).abs())
        .fold(0.0_f64, f64::max);
    let gain_tol = 1e-6 * scale;
    let uni_tol = 1e-9 * scale.max(1e-3);
    let passed = worst_gain <= gain_tol && uniform_err <= uni_tol;
    (
        passed,
        format!(
            "worst relative deviation gain {worst_gain:.2e} (tol {gain_tol:.0e}); \
             homogeneous max |p - n/m| = {uniform_err:.2e}"
        ),
    )
}

// --- criterion 5 -----------------------------------------------------

fn dilemma_limits(scale: f64, seed: u64) -> (bool, String) {
    let _ = seed;
    // Large delay: the solver collapses toward uniform play, and its
    // deviation gain sits within the random-strategy gap bound.
    let fees = uniform_fee_profile(10_000);
    let (n, lambda, delay) = (2000, 1.0, 1e4);
    let sol = equilibrium_strategy(&fees, n, lambda, delay).expect("solvable");
    let own =
        expected_revenue(&sol.strategy, &sol.strategy, &fees, lambda, delay).expect("lengths");
    let (best, _) = best_response(&sol.strategy, &fees, lambda, delay).expect("lengths");
    let solver_gain = best - own;
    let rand = strategy_random(fees.len(), n).expect("n <= m");
    let rand_own = expected_revenue(&rand, &rand, &fees, lambda, delay).expect("lengths");
    let (rand_best, _) = best_response(&rand, &fees, lambda, delay).expect("lengths");
    let rand_gain = rand_best - rand_own;
    let xi = analytics::random_gap_xi(&fees, n, lambda, delay);
    let within_xi = (rand_gain - solver_gain).abs() <= xi * (1.0 + 1e-9) && rand_gain <= xi * (1.0 + 1e-9);

    // Small signal delay: below the uniqueness threshold the solver
    // returns exactly top-n.
    let mut gapped = uniform_fee_profile(200);
    for f in gapped.iter_mut().skip(40) {
        *f *= 0.85;
    }
    let threshold = analytics::topn_uniqueness_threshold(gapped[39], gapped[40], 0.5)
        .expect("sorted with gap");
    let below = equilibrium_strategy(&gapped, 40, 0.5, 0.5 * threshold).expect("solvable");
    let top = strategy_top_n(&gapped, 40).expect("sorted");
    let top_err = below
        .strategy
        .probabilities()
        .iter()
        .zip(top.probabilities())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let above = equilibrium_strategy(&gapped, 40, 0.5, 2.0 * threshold).expect("solvable");
    let softened = above.strategy.probabilities()[39] < 1.0 - 1e-9
        || above.strategy.probabilities()[40] > 1e-9;
    let top_tol = 1e-9 * scale.max(1e-3);
    let passed = within_xi && top_err <= top_tol && softened;
    (
        passed,
        format!(
            "huge-delay gains: solver {solver_gain:.3e}, random {rand_gain:.3e}, xi {xi:.3e}; \
             below-threshold top-n error {top_err:.1e}; above-threshold softened: {softened}"
        ),
    )
}

// --- criterion 6 -----------------------------------------------------

fn revenue_trend(seed: u64) -> (bool, String) {
    let mut failures = Vec::new();
    for i in 1..=10u32 {
        let lambda = i as f64 / 10.0;
        let run = |protocol| {
            let config = desk_scale_config(
                seed + 100 + i as u64,
                protocol,
                StrategyKind::Equilibrium,
                lambda,
                400.0,
            );
            let trace = run_simulation(&config).expect("valid config");
            metrics::summarize(&trace).expect("non-empty run")
        };
        let std = run(Protocol::Standard);
        let tips = run(Protocol::Tips);
        if tips.revenue_per_block_mean <= std.revenue_per_block_mean {
            failures.push(format!(
                "lambda {lambda}: tips {:.2} <= std {:.2}",
                tips.revenue_per_block_mean, std.revenue_per_block_mean
            ));
        }
    }
    if failures.is_empty() {
        (true, "equilibrium revenue under signaling beats standard at all 10 rates".into())
    } else {
        (false, failures.join("; "))
    }
}

fn revenue_formula(scale: f64, seed: u64) -> (bool, String) {
    let mut config =
        paper_scale_config(seed + 777, Protocol::Tips, StrategyKind::Equilibrium, 0.5, 4200.0);
    config.tx_rate = 2500.0;
    let trace = run_simulation(&config).expect("valid config");
    let s = metrics::summarize(&trace).expect("non-empty run");
    // Evaluate the closed form on the measured steady-state value
    // profile with the equilibrium recomputed on it.
    let profile: Vec<f64> =
        trace.mean_sorted_values.iter().copied().filter(|v| *v > 0.0).collect();
    let delay = config.effective_delay();
    let sol = equilibrium_strategy(&profile, config.n.min(profile.len()), config.lambda, delay)
        .expect("solvable profile");
    let predicted =
        expected_revenue(&sol.strategy, &sol.strategy, &profile, config.lambda, delay)
            .expect("lengths match");
    let rel = (s.revenue_per_block_mean - predicted).abs() / predicted;
    let tol = 0.05 * scale;
    (
        rel <= tol,
        format!(
            "measured revenue/block {:.2} vs closed form {predicted:.2} (rel err {rel:.4}, tol {tol:.3})",
            s.revenue_per_block_mean
        ),
    )
}

// --- criterion 7 -----------------------------------------------------

fn fsr_identity(scale: f64, seed: u64) -> (bool, String) {
    let mut config =
        desk_scale_config(seed + 200, Protocol::Tips, StrategyKind::TopN, 0.5, 800.0);
    config.tx_rate = 2.5 * config.lambda * config.n as f64;
    let trace = run_simulation(&config).expect("valid config");
    let s = metrics::summarize(&trace).expect("non-empty run");
    // Exact identity on the same counters.
    let identity_err =
        (s.fsr - s.measured_lambda * s.revenue_per_block_mean).abs() / s.fsr.max(1e-12);
    // Closed form on the measured profile.
    let profile: Vec<f64> =
        trace.mean_sorted_values.iter().copied().filter(|v| *v > 0.0).collect();
    let want = config.n.min(profile.len());
    let top = strategy_top_n(&profile, want).expect("sorted profile");
    let predicted =
        analytics::fee_service_rate(&top, &profile, config.lambda, config.effective_delay())
            .expect("lengths match");
    let rel = (s.fsr - predicted).abs() / predicted;
    let tol_exact = 1e-12 * scale.max(1e-3);
    let tol_formula = 0.05 * scale;
    let passed = identity_err <= tol_exact && rel <= tol_formula;
    (
        passed,
        format!(
            "identity rel err {identity_err:.2e} (tol {tol_exact:.0e}); \
             formula fsr {predicted:.2} vs measured {:.2} (rel {rel:.4}, tol {tol_formula:.3})",
            s.fsr
        ),
    )
}

// --- criterion 8 -----------------------------------------------------

fn confirmation_ordering(scale: f64, seed: u64) -> (bool, String) {
    let mk = |protocol| {
        let mut c =
            paper_scale_config(seed + 300, protocol, StrategyKind::TopN, 0.5, 3000.0);
        // Undersaturated load: both protocols keep up, so confirmation
        // latency (not censoring) carries the comparison.
        c.tx_rate = 150.0;
        c
    };
    let tips_trace = run_simulation(&mk(Protocol::Tips)).expect("valid config");
    let std_trace = run_simulation(&mk(Protocol::Standard)).expect("valid config");
    let bounds = metrics::fee_decile_bounds(&tips_trace);
    let (tips_ct, _) = metrics::measure_confirmation_time(&tips_trace, &bounds);
    let std_bounds = metrics::fee_decile_bounds(&std_trace);
    let (std_ct, _) = metrics::measure_confirmation_time(&std_trace, &std_bounds);
    let tips_mean = mean_finite(&tips_ct);
    let std_mean = mean_finite(&std_ct);
    // Ascending fee deciles must not increase in confirmation time,
    // up to statistical slack around ties.
    let slack = (0.25 * tips_mean + 0.05) * scale;
    let mut ordered = true;
    for d in 0..9 {
        if tips_ct[d + 1] > tips_ct[d] + slack {
            ordered = false;
        }
    }
    let passed = ordered && tips_mean < std_mean;
    (
        passed,
        format!(
            "signaling deciles (s) {:?} mean {tips_mean:.2}; standard mean {std_mean:.2}; \
             ordered (slack {slack:.2}): {ordered}",
            tips_ct.map(|v| (v * 100.0).round() / 100.0)
        ),
    )
}

fn mean_finite(values: &[f64; 10]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    finite.iter().sum::<f64>() / finite.len().max(1) as f64
}

// --- criterion 9 -----------------------------------------------------

fn flood_defense(scale: f64, seed: u64) -> (bool, String) {
    let (b, h, n) = (20_000u32, 5u8, 2000u32);
    let eta = 1e-4;
    let policy = FloodPolicy::new(b, h, n, eta).expect("valid eta");

    // Adversarial filters with popcount at or above the threshold:
    // rejected without exception, from the borderline to saturation.
    let mut adversarial_rejected = true;
    for trial in 0..50u64 {
        let mut f = BloomFilter::new(b, h).expect("valid dims");
        if trial % 2 == 0 {
            f.saturate();
        } else {
            let mut k = 0u64;
            while (f.popcount() as f64) < policy.threshold() {
                f.insert(&TxId::from_index(k, seed ^ trial ^ 0xF100D));
                k += 1;
            }
        }
        if bloom::validate(&f, &policy).expect("dims match") != Validation::Reject {
            adversarial_rejected = false;
        }
    }

    // Honest filters: rejection rate within eta + 3 sigma.
    let trials = 100_000u64;
    let mut rejections = 0u64;
    for t in 0..trials {
        let mut f = BloomFilter::new(b, h).expect("valid dims");
        for k in 0..n as u64 {
            f.insert(&TxId::from_index(k, seed ^ (t << 1) ^ 1));
        }
        if bloom::validate(&f, &policy).expect("dims match") == Validation::Reject {
            rejections += 1;
        }
    }
    let budget = eta * trials as f64;
    let cap = (budget + 3.0 * budget.sqrt()) * scale.max(1e-6);
    let honest_ok = (rejections as f64) <= cap;

    // Amortized validation cost.
    let mut filter = BloomFilter::new(b, h).expect("valid dims");
    for k in 0..n as u64 {
        filter.insert(&TxId::from_index(k, seed));
    }
    let reps = 100_000u32;
    let t0 = Instant::now();
    let mut accepted = 0u32;
    for _ in 0..reps {
        let f = std::hint::black_box(&filter);
        if bloom::validate(f, &policy).expect("dims match") == Validation::Accept {
            accepted += 1;
        }
    }
    std::hint::black_box(accepted);
    let micros = t0.elapsed().as_secs_f64() * 1e6 / reps as f64;
    let time_ok = micros <= 10.0 * scale.max(0.1);

    // Engine level: flood headers are rejected everywhere and honest
    // state is untouched (paired run with the attacker removed).
    let mut cfg = desk_scale_config(seed + 400, Protocol::Tips, StrategyKind::TopN, 0.5, 150.0);
    cfg.tx_rate = 1.2 * cfg.lambda * cfg.n as f64;
    let attacked = run_simulation(&cfg.clone().with_flood_attacker(10.0)).expect("valid config");
    let clean = run_simulation(&cfg).expect("valid config");
    let mut flood_outcomes_ok = true;
    let mut flood_seen = 0u64;
    for e in &attacked.events {
        if attacked.blocks[e.block as usize].kind == BlockKind::Flood {
            flood_seen += 1;
            if e.kind != EventKind::HeaderRecv
                || e.aux != crate::sim::trace::aux::REJECTED_FLOOD
            {
                flood_outcomes_ok = false;
            }
        }
    }
    // Attack headers occupy block-id slots, so align honest blocks by
    // ordinal before comparing: contents, times and honest event streams
    // must agree exactly, not just statistically.
    let honest_view = |trace: &crate::sim::trace::EventTrace| {
        let mut ordinal = vec![u32::MAX; trace.blocks.len()];
        let mut blocks = Vec::new();
        for (bi, b) in trace.blocks.iter().enumerate() {
            if b.kind != BlockKind::Flood {
                ordinal[bi] = blocks.len() as u32;
                blocks.push((b.mine_time, b.miner, b.txs.clone()));
            }
        }
        let events: Vec<(f64, EventKind, u32, u32, u32)> = trace
            .events
            .iter()
            .filter(|e| trace.blocks[e.block as usize].kind != BlockKind::Flood)
            .map(|e| (e.time, e.kind, e.actor, ordinal[e.block as usize], e.aux))
            .collect();
        (blocks, events)
    };
    let unperturbed = honest_view(&attacked) == honest_view(&clean);

    let passed =
        adversarial_rejected && honest_ok && time_ok && flood_outcomes_ok && unperturbed && flood_seen > 0;
    (
        passed,
        format!(
            "adversarial rejected: {adversarial_rejected}; honest rejections {rejections}/{trials} \
             (cap {cap:.1}); {micros:.2} us/validation; {flood_seen} flood headers all rejected: \
             {flood_outcomes_ok}; honest state unperturbed: {unperturbed}"
        ),
    )
}

// --- criterion 10 ----------------------------------------------------

fn delay_attack(scale: f64, seed: u64) -> (bool, String) {
    let (lambda, timeout) = (0.5, 2.0);
    let episodes = 20_000;
    let mut details = Vec::new();
    let mut passed = true;
    for (i, alpha) in [0.1, 0.25, 0.4].into_iter().enumerate() {
        let stats =
            oracles::delay_attack_episodes(alpha, lambda, timeout, episodes, seed + i as u64);
        let expect = analytics::delay_attack_episode_mean(alpha, lambda, timeout);
        let rel = (stats.mean_added_delay - expect).abs() / expect;
        let tol = 0.05 * scale;
        if rel > tol {
            passed = false;
        }
        details.push(format!(
            "alpha {alpha}: measured {:.3} vs {expect:.3} (rel {rel:.3}, tol {tol:.3})",
            stats.mean_added_delay
        ));
    }
    (passed, details.join("; "))
}

// --- criterion 11 ----------------------------------------------------

fn throughput_limit_statement() -> (bool, String) {
    // The block-size throughput ceiling ratio depends directly on the
    // assumed transaction size; both readings are computed, neither is
    // asserted against measurements at this scale.
    let per_kb = 0.08; // s per extra KB broadcast
    let small_tx = analytics::limit_tps(per_kb * 0.5).expect("positive");
    let ratio_500b = analytics::limit_tps_ratio(500.0 * 8.0, 8.0).expect("positive");
    let ratio_500kb = analytics::limit_tps_ratio(500_000.0 * 8.0, 8.0).expect("positive");
    (
        true,
        format!(
            "not reproducible at desk scale by design: ceiling {small_tx:.0} tx/s at 500 B \
             transactions; signaling-to-standard ceiling ratio {ratio_500b:.0} (500 B txs) \
             or {ratio_500kb:.0} (500 KB txs); absolute figure hinges on transaction size"
        ),
    )
}
