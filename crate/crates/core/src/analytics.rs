//! Closed-form performance and attack formulas.
//!
//! These are the analytic counterparts of what the simulator measures:
//! block-capacity utilization and throughput for a given inclusion
//! strategy, the revenue gaps of the named strategies, the uniqueness
//! threshold for top-n play, efficiency lower bounds, the throughput
//! ceiling in block size, and the expected delay a header-withholding
//! attacker can inflict. Every function is pure and finite on its whole
//! stated domain, including the `p -> 0/1` and `delay -> 0` edges.

use crate::numeric::{phi, phi_inverse, poisson_cdf};
use crate::strategies::InclusionStrategy;
use thiserror::Error;

/// Reference ratio of the 10th to the 90th percentile transaction fee
/// observed on Bitcoin. A signal whose false-positive rate stays below
/// this ratio keeps high-fee suppression informative even for the
/// cheapest pooled transactions; used in documentation and preflight
/// diagnostics only.
pub const BITCOIN_FEE_PERCENTILE_RATIO: f64 = 0.0304;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("strategy length {p} does not match fee vector length {fees}")]
    LengthMismatch { p: usize, fees: usize },
    #[error("fee ratio must lie in (0, 1], got {0}")]
    RatioOutOfRange(f64),
    #[error("marginal delay must be positive, got {0}")]
    NonPositiveMarginalDelay(f64),
}

/// System-level parameters shared by the analytic formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Block production rate, blocks/s.
    pub lambda: f64,
    /// Body propagation delay, s.
    pub delta: f64,
    /// Signal propagation delay, s.
    pub tau: f64,
    /// Block capacity, transactions.
    pub n: usize,
    /// Pool size, transactions.
    pub m: usize,
    /// Signal false-positive rate.
    pub epsilon: f64,
    /// Signal bits budgeted per transaction.
    pub signal_bits_per_tx: f64,
    /// Transaction size in bits.
    pub tx_size_bits: f64,
    /// Header timeout, s.
    pub header_timeout: f64,
    /// Attacker share of total mining power.
    pub attacker_power: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let fail = |msg: String| Err(AnalyticsError::InvalidParams(msg));
        if !(self.lambda > 0.0) {
            return fail(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.tau > 0.0 && self.tau <= self.delta) {
            return fail(format!("need 0 < tau <= delta, got tau={} delta={}", self.tau, self.delta));
        }
        if self.n == 0 || self.n > self.m {
            return fail(format!("need 1 <= n <= m, got n={} m={}", self.n, self.m));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon must lie in (0,1), got {}", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.attacker_power) {
            return fail(format!("attacker power must lie in [0,1], got {}", self.attacker_power));
        }
        Ok(())
    }
}

/// Block-capacity utilization of symmetric play `p` at effective delay
/// `delay`: `(m - sum (1 - p_i) e^{-lambda delay p_i}) / (n (lambda delay + 1))`.
///
/// The effective delay is the body delay without signaling and the
/// signal delay with it.
pub fn utilization(p: &InclusionStrategy, lambda: f64, delay: f64) -> f64 {
    assert!(lambda > 0.0 && delay >= 0.0);
    let a = lambda * delay;
    let m = p.len() as f64;
    let n = p.block_capacity() as f64;
    let lost: f64 = p.probabilities().iter().map(|&pi| (1.0 - pi) * (-a * pi).exp()).sum();
    (m - lost) / (n * (a + 1.0))
}

/// System throughput `lambda * n * utilization`, transactions/s.
pub fn throughput(p: &InclusionStrategy, lambda: f64, delay: f64) -> f64 {
    lambda * p.block_capacity() as f64 * utilization(p, lambda, delay)
}

/// Fee service rate `(1/delay) sum f_i (1 - e^{-lambda delay p_i})` in
/// coin/s: the total fee mass the system settles per second under
/// symmetric play `p`. Computed from its own expression rather than via
/// the revenue function so the `FSR = lambda * R` identity stays a real
/// cross-check.
pub fn fee_service_rate(
    p: &InclusionStrategy,
    fees: &[f64],
    lambda: f64,
    delay: f64,
) -> Result<f64, AnalyticsError> {
    if p.len() != fees.len() {
        return Err(AnalyticsError::LengthMismatch { p: p.len(), fees: fees.len() });
    }
    assert!(lambda > 0.0 && delay >= 0.0);
    if delay == 0.0 {
        // Limit of the expression as delay -> 0.
        return Ok(lambda * p.probabilities().iter().zip(fees).map(|(&pi, &fi)| pi * fi).sum::<f64>());
    }
    let a = lambda * delay;
    Ok(p.probabilities()
        .iter()
        .zip(fees)
        .map(|(&pi, &fi)| fi * -(-a * pi).exp_m1())
        .sum::<f64>()
        / delay)
}

/// Best-deviation bound for uniform random inclusion:
/// `xi = n * phi(lambda delay n / m) * (mean of top-n fees - mean of all fees)`.
/// Uniform play is a `xi`-approximate equilibrium, and `xi -> 0` as the
/// delay grows.
pub fn random_gap_xi(fees: &[f64], n: usize, lambda: f64, delay: f64) -> f64 {
    assert!(n >= 1 && n <= fees.len());
    let m = fees.len() as f64;
    let top_mean = fees[..n].iter().sum::<f64>() / n as f64;
    let all_mean = fees.iter().sum::<f64>() / m;
    n as f64 * phi(lambda * delay * n as f64 / m) * (top_mean - all_mean)
}

/// Best-deviation bound for top-n play at signal delay `tau`:
/// `eta <= | n (1 - phi(lambda tau)) f_n |`. Top-n is an
/// `eta`-approximate equilibrium, exact as `tau -> 0`.
pub fn topn_gap_eta(fees: &[f64], n: usize, lambda: f64, tau: f64) -> f64 {
    assert!(n >= 1 && n <= fees.len());
    (n as f64 * (1.0 - phi(lambda * tau)) * fees[n - 1]).abs()
}

/// Largest signal delay at which top-n is the unique equilibrium:
/// `tau_max = phi^{-1}(f_{n+1} / f_n) / lambda`.
pub fn topn_uniqueness_threshold(
    fee_n: f64,
    fee_n_plus_1: f64,
    lambda: f64,
) -> Result<f64, AnalyticsError> {
    if !(fee_n > 0.0) || !(fee_n_plus_1 > 0.0) || fee_n_plus_1 > fee_n {
        return Err(AnalyticsError::RatioOutOfRange(fee_n_plus_1 / fee_n));
    }
    assert!(lambda > 0.0);
    Ok(phi_inverse(fee_n_plus_1 / fee_n) / lambda)
}

/// Lower bound on the efficiency (equilibrium / optimum, for both
/// revenue and throughput) of signaling play:
/// `(1 - e^{-lambda tau}) / (floor(m/n) - sum_{k<=floor(m/n)} Poisson(k; lambda tau))`.
pub fn efficiency_lower_bound(lambda: f64, tau: f64, m: usize, n: usize) -> f64 {
    assert!(lambda > 0.0 && tau > 0.0 && n >= 1 && m >= n);
    let mu = lambda * tau;
    let k = (m / n) as u64;
    let numerator = -(-mu).exp_m1();
    let denominator = k as f64 - poisson_cdf(k, mu);
    numerator / denominator
}

/// Alternative efficiency lower bound `1 / (lambda tau + 1)` from the
/// throughput route. The two bounds differ numerically; both are
/// reported, neither is asserted as the tighter one.
pub fn efficiency_lower_bound_simple(lambda: f64, tau: f64) -> f64 {
    assert!(lambda > 0.0 && tau >= 0.0);
    1.0 / (lambda * tau + 1.0)
}

/// Throughput ceiling in the block-size limit: the reciprocal of the
/// marginal propagation delay per added transaction.
pub fn limit_tps(marginal_delay_per_tx: f64) -> Result<f64, AnalyticsError> {
    if !(marginal_delay_per_tx > 0.0) {
        return Err(AnalyticsError::NonPositiveMarginalDelay(marginal_delay_per_tx));
    }
    Ok(1.0 / marginal_delay_per_tx)
}

/// Ratio of the signaling throughput ceiling to the plain-broadcast
/// ceiling: a marginal transaction costs `signal_bits_per_tx` bits on
/// the signal path versus its full size on the body path.
pub fn limit_tps_ratio(tx_size_bits: f64, signal_bits_per_tx: f64) -> Result<f64, AnalyticsError> {
    if !(tx_size_bits > 0.0) || !(signal_bits_per_tx > 0.0) {
        return Err(AnalyticsError::InvalidParams(
            "sizes must be positive".into(),
        ));
    }
    Ok(tx_size_bits / signal_bits_per_tx)
}

/// Expected extra delay a withholding attacker with power share `alpha`
/// inflicts on a targeted transaction: `(e^{alpha lambda T} - 1) / lambda`,
/// where `T` is the header timeout the attacker must renew within.
pub fn delay_attack_expectation(alpha: f64, lambda: f64, timeout: f64) -> f64 {
    assert!((0.0..=1.0).contains(&alpha));
    assert!(lambda > 0.0 && timeout >= 0.0);
    (alpha * lambda * timeout).exp_m1() / lambda
}

/// Expected duration of one attack episode conditioned on the attacker
/// having started it: `(e^{alpha lambda T} - 1) / (alpha lambda)`.
/// Multiplying by the start probability `alpha` recovers
/// [`delay_attack_expectation`].
pub fn delay_attack_episode_mean(alpha: f64, lambda: f64, timeout: f64) -> f64 {
    assert!(alpha > 0.0 && alpha <= 1.0);
    assert!(lambda > 0.0 && timeout >= 0.0);
    (alpha * lambda * timeout).exp_m1() / (alpha * lambda)
}
