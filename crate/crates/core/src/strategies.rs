//! Transaction-inclusion strategies and the symmetric equilibrium solver.
//!
//! A strategy is a probability vector `p` over the pool sorted by
//! descending expected value, with `0 <= p_i <= 1` and `sum p_i = n`.
//! The reward coefficient `r(p | d) = (1 - e^{-lambda d p}) / (lambda d p)`
//! is the expected fee share kept when every other miner includes the
//! same transaction with probability `p` under propagation delay `d`;
//! everything in this module reduces to that one function and its
//! inverse.

use crate::numeric::{phi, phi_inverse, phi_prime};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("probability {value} at index {index} outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {got}, expected {want} (tolerance 1e-9)")]
    MassMismatch { got: f64, want: f64 },
    #[error("need n <= m, got n={n} m={m}")]
    BlockLargerThanPool { n: usize, m: usize },
    #[error("strategy vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("fees must be sorted in descending order")]
    FeesNotSorted,
    #[error("fewer than n positive fees ({positive} positive, n={n})")]
    NotEnoughPositiveFees { positive: usize, n: usize },
    #[error("root bracketing failed: F({lo}) = {f_lo}, F({hi}) = {f_hi}")]
    BracketFailure { lo: f64, f_lo: f64, hi: f64, f_hi: f64 },
}

/// Compensated sum; the solver tolerances are tighter than a naive sum
/// over 10^4 terms can deliver.
fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Inclusion-probability vector over the sorted pool.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionStrategy {
    p: Vec<f64>,
    block_capacity: usize,
}

impl InclusionStrategy {
    /// Validates bounds and total mass (`sum p_i = n` within 1e-9).
    pub fn new(p: Vec<f64>, block_capacity: usize) -> Result<Self, StrategyError> {
        for (index, &value) in p.iter().enumerate() {
            if !(0.0..=1.0 + 1e-12).contains(&value) || value.is_nan() {
                return Err(StrategyError::ProbabilityOutOfRange { index, value });
            }
        }
        let total = kahan_sum(p.iter().copied());
        if (total - block_capacity as f64).abs() > 1e-9 {
            return Err(StrategyError::MassMismatch { got: total, want: block_capacity as f64 });
        }
        Ok(InclusionStrategy { p, block_capacity })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn block_capacity(&self) -> usize {
        self.block_capacity
    }
}

/// Expected fee share `r(p | d)` kept by a block that includes a
/// transaction all other miners include with probability `p`, given
/// block rate `lambda` and propagation delay `delay`. Equals 1 in the
/// `p -> 0` or `delay -> 0` limits and decreases to `r(1 | d)`.
pub fn reward_coefficient(p: f64, lambda: f64, delay: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "p must lie in [0,1], got {p}");
    assert!(lambda > 0.0 && delay >= 0.0);
    phi(lambda * delay * p)
}

/// Inverse of [`reward_coefficient`] in `p`, clamped into [0, 1]:
/// `y > 1` saturates to 0 and `y < r(1 | d)` saturates to 1.
pub fn reward_coefficient_inverse(y: f64, lambda: f64, delay: f64) -> f64 {
    assert!(y > 0.0, "reward coefficient is positive, got {y}");
    assert!(lambda > 0.0 && delay >= 0.0);
    let a = lambda * delay;
    if y >= 1.0 {
        return 0.0;
    }
    if a == 0.0 {
        // r is identically 1; any y below 1 clamps to full inclusion.
        return 1.0;
    }
    (phi_inverse(y) / a).min(1.0)
}

/// Revenue per block `R(p | p') = sum p_i f_i r(p'_i | delay)` for a miner
/// playing `p` while everyone else plays `p_others`.
pub fn expected_revenue(
    p: &InclusionStrategy,
    p_others: &InclusionStrategy,
    fees: &[f64],
    lambda: f64,
    delay: f64,
) -> Result<f64, StrategyError> {
    if p.len() != p_others.len() {
        return Err(StrategyError::LengthMismatch(p.len(), p_others.len()));
    }
    if p.len() != fees.len() {
        return Err(StrategyError::LengthMismatch(p.len(), fees.len()));
    }
    let a = lambda * delay;
    Ok(kahan_sum(
        p.probabilities()
            .iter()
            .zip(p_others.probabilities())
            .zip(fees)
            .map(|((&pi, &qi), &fi)| pi * fi * phi(a * qi)),
    ))
}

/// Uniform inclusion: `p_i = n / m` for every pool slot.
pub fn strategy_random(m: usize, n: usize) -> Result<InclusionStrategy, StrategyError> {
    if n > m {
        return Err(StrategyError::BlockLargerThanPool { n, m });
    }
    // Exact mass: spread n over m slots in two rational chunks so the
    // Kahan total lands on n even when n/m is not representable.
    let p = vec![n as f64 / m as f64; m];
    let drift = kahan_sum(p.iter().copied()) - n as f64;
    let mut p = p;
    if drift != 0.0 && !p.is_empty() {
        p[0] -= drift;
    }
    InclusionStrategy::new(p, n)
}

/// Fee-proportional inclusion `p_i = min(1, kappa * f_i)` with `kappa`
/// chosen so the mass is exactly `n` (water-filling on the clamp).
/// An all-zero fee vector degenerates to the uniform strategy, since
/// proportionality carries no information there.
pub fn strategy_priority(fees: &[f64], n: usize) -> Result<InclusionStrategy, StrategyError> {
    ensure_sorted_desc(fees)?;
    let m = fees.len();
    if n > m {
        return Err(StrategyError::BlockLargerThanPool { n, m });
    }
    if fees.iter().all(|&f| f == 0.0) {
        return strategy_random(m, n);
    }
    if n == 0 {
        return InclusionStrategy::new(vec![0.0; m], 0);
    }
    let positive = fees.iter().take_while(|&&f| f > 0.0).count();
    if positive < n {
        return Err(StrategyError::NotEnoughPositiveFees { positive, n });
    }
    let mass = |kappa: f64| kahan_sum(fees.iter().map(|&f| (kappa * f).min(1.0))) - n as f64;
    let mut hi = 1.0;
    while mass(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            break; // all positive fees clamped; mass(hi) is maximal
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kappa = 0.5 * (lo + hi);
    let mut p: Vec<f64> = fees.iter().map(|&f| (kappa * f).min(1.0)).collect();
    redistribute_mass_error(&mut p, n);
    InclusionStrategy::new(p, n)
}

/// Deterministic top-n: probability 1 on the n highest-value slots.
pub fn strategy_top_n(fees: &[f64], n: usize) -> Result<InclusionStrategy, StrategyError> {
    ensure_sorted_desc(fees)?;
    let m = fees.len();
    if n > m {
        return Err(StrategyError::BlockLargerThanPool { n, m });
    }
    let mut p = vec![0.0; m];
    for slot in p.iter_mut().take(n) {
        *slot = 1.0;
    }
    InclusionStrategy::new(p, n)
}

fn ensure_sorted_desc(fees: &[f64]) -> Result<(), StrategyError> {
    if fees.windows(2).any(|w| w[0] < w[1]) {
        return Err(StrategyError::FeesNotSorted);
    }
    Ok(())
}

/// Nudge unclamped entries so the compensated mass equals `n` exactly
/// (within the 1e-9 invariant); bisection alone leaves ~1e-12 residue.
fn redistribute_mass_error(p: &mut [f64], n: usize) {
    let err = kahan_sum(p.iter().copied()) - n as f64;
    if err == 0.0 {
        return;
    }
    if let Some(slot) = p
        .iter_mut()
        .find(|v| **v > 1e-6 && **v < 1.0 - 1e-6)
    {
        *slot -= err;
    }
}

/// Output of the equilibrium solver.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub strategy: InclusionStrategy,
    /// Number of leading (highest-value) slots with any inclusion mass.
    pub cutoff_index: usize,
    /// The marginal expected reward `c` at the cutoff: every slot with
    /// interior probability satisfies `f_i * r(p_i) = c`.
    pub threshold: f64,
}

/// Symmetric equilibrium of the inclusion game over `fees` (sorted
/// descending) with block capacity `n`, block rate `lambda`, and
/// effective propagation delay `delay` (body delay without signaling,
/// signal delay with it).
///
/// Internally solves `F_l(c) = sum_{i<=l} min(r^{-1}(c / f_i), 1) - n`
/// for the largest admissible cutoff `l*` and the threshold `c` with
/// `F_{l*}(c) = 0`, then clamps. Entries with zero fee never earn and
/// receive probability zero.
pub fn equilibrium_strategy(
    fees: &[f64],
    n: usize,
    lambda: f64,
    delay: f64,
) -> Result<EquilibriumSolution, StrategyError> {
    assert!(lambda > 0.0 && delay > 0.0, "lambda and delay must be positive");
    ensure_sorted_desc(fees)?;
    let m = fees.len();
    if n > m {
        return Err(StrategyError::BlockLargerThanPool { n, m });
    }
    let positive = fees.iter().take_while(|&&f| f > 0.0).count();
    if positive < n {
        return Err(StrategyError::NotEnoughPositiveFees { positive, n });
    }
    if n == 0 {
        return Ok(EquilibriumSolution {
            strategy: InclusionStrategy::new(vec![0.0; m], 0)?,
            cutoff_index: 0,
            threshold: 0.0,
        });
    }

    // Work on fees normalized by f_1; the equilibrium is scale invariant
    // and this keeps every tolerance relative to the fee scale.
    let scale = fees[0];
    let norm: Vec<f64> = fees[..positive].iter().map(|&f| f / scale).collect();
    let a = lambda * delay;

    // F_l(f_l) is non-decreasing in l (lower threshold, more terms), so
    // the admissible set {l : F_l(f_l) <= 0} is a prefix and the cutoff
    // is found by binary search. l = n is always admissible.
    let mut lo = n;
    let mut hi = positive;
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if mass_at(&norm[..mid], norm[mid - 1], a) - n as f64 <= 0.0 {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let l_star = lo;

    // Root of F_{l*} on (0, f_{l*}]: F decreases in c, F(0+) = l* - n >= 0
    // and F(f_{l*}) <= 0.
    let slice = &norm[..l_star];
    let f_cut = norm[l_star - 1];
    let mut c_lo = 0.0_f64;
    let mut c_hi = f_cut;
    let f_at = |c: f64| mass_at(slice, c, a) - n as f64;
    let (f_lo, f_hi) = (f_at(c_lo.max(f64::MIN_POSITIVE)), f_at(c_hi));
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(StrategyError::BracketFailure {
            lo: c_lo,
            f_lo,
            hi: c_hi * scale,
            f_hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (c_lo + c_hi);
        if mid <= c_lo || mid >= c_hi {
            break;
        }
        if f_at(mid) >= 0.0 {
            c_lo = mid;
        } else {
            c_hi = mid;
        }
        if c_hi - c_lo < 1e-15 * c_hi.max(1e-12) {
            break;
        }
    }
    let c = 0.5 * (c_lo + c_hi);

    let mut p = vec![0.0; m];
    fill_inclusion_probabilities(slice, c, a, &mut p[..l_star]);
    // The bisection residue is far below 1e-9 but the invariant is exact
    // mass; absorb the remainder into an interior slot.
    redistribute_mass_error(&mut p, n);
    let strategy = InclusionStrategy::new(p, n)?;
    Ok(EquilibriumSolution { strategy, cutoff_index: l_star, threshold: c * scale })
}

/// `sum_{i} min(r^{-1}(c / f_i), 1)` over a descending fee slice.
fn mass_at(fees: &[f64], c: f64, a: f64) -> f64 {
    let mut probs = vec![0.0; fees.len()];
    fill_inclusion_probabilities(fees, c, a, &mut probs);
    kahan_sum(probs.iter().copied())
}

/// Vector inverse: `out[i] = min(phi_inverse(c / f_i) / a, 1)`.
///
/// The ratios `c / f_i` ascend, so the inverses descend; each entry's
/// Newton iteration warm-starts from the previous solution with the
/// bracket [0, previous] as a safeguard.
fn fill_inclusion_probabilities(fees: &[f64], c: f64, a: f64, out: &mut [f64]) {
    debug_assert_eq!(fees.len(), out.len());
    let r_at_one = phi(a);
    let mut prev_x = f64::INFINITY;
    for (i, (&f, slot)) in fees.iter().zip(out.iter_mut()).enumerate() {
        let y = c / f;
        if y >= 1.0 {
            *slot = 0.0;
            prev_x = 0.0;
            continue;
        }
        if y <= r_at_one {
            // phi_inverse(y) >= a, clamped.
            *slot = 1.0;
            prev_x = f64::INFINITY;
            continue;
        }
        let x = if prev_x.is_finite() {
            newton_phi_inverse(y, prev_x)
        } else {
            phi_inverse(y)
        };
        debug_assert!(i == 0 || x.is_finite());
        prev_x = x;
        *slot = (x / a).min(1.0);
    }
}

/// Solve `phi(x) = y` by damped Newton from a warm start known to sit at
/// or above the root; falls back to plain bisection on stagnation.
fn newton_phi_inverse(y: f64, upper: f64) -> f64 {
    let mut x = upper.min(phi_inverse_upper_bound(y));
    let mut lo = 0.0_f64;
    let mut hi = x;
    for _ in 0..60 {
        let val = phi(x) - y;
        if val.abs() < 1e-16 {
            return x;
        }
        if val > 0.0 {
            // phi(x) too big -> x below root.
            lo = x;
        } else {
            hi = x;
        }
        let step = val / phi_prime(x);
        let candidate = x - step;
        x = if candidate > lo && candidate < hi {
            candidate
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi.max(1e-300) {
            return 0.5 * (lo + hi);
        }
    }
    x
}

fn phi_inverse_upper_bound(y: f64) -> f64 {
    // phi(x) > (1 - e^-x)/x > ... ; 2/y always brackets from above for
    // y < 1 (phi(2/y) < y/2 * 2 = ... conservative but cheap).
    (2.0 / y).max(1.0)
}

/// Exact best response against `p_star`: the response value is linear in
/// the deviator's probabilities with coefficients `f_i * r(p*_i)`, so the
/// optimum puts full mass on the `n` largest coefficients. Returns the
/// optimal revenue and the optimizing strategy.
pub fn best_response(
    p_star: &InclusionStrategy,
    fees: &[f64],
    lambda: f64,
    delay: f64,
) -> Result<(f64, InclusionStrategy), StrategyError> {
    if p_star.len() != fees.len() {
        return Err(StrategyError::LengthMismatch(p_star.len(), fees.len()));
    }
    let n = p_star.block_capacity();
    let a = lambda * delay;
    let mut coeffs: Vec<(f64, usize)> = p_star
        .probabilities()
        .iter()
        .zip(fees)
        .enumerate()
        .map(|(i, (&q, &f))| (f * phi(a * q), i))
        .collect();
    coeffs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut p = vec![0.0; fees.len()];
    let mut revenue = 0.0;
    for &(w, i) in coeffs.iter().take(n) {
        p[i] = 1.0;
        revenue += w;
    }
    Ok((revenue, InclusionStrategy::new(p, n)?))
}

/// Realize a probability vector as an exact-size inclusion set via
/// systematic sampling: one uniform draw `u` places `n` evenly spaced
/// pointers over the cumulative masses, preserving every marginal
/// exactly and always selecting `round(sum p)` distinct slots (each
/// `p_i <= 1` spans at most one pointer).
pub fn systematic_sample(strategy: &InclusionStrategy, u: f64) -> Vec<usize> {
    assert!((0.0..1.0).contains(&u), "u must lie in [0,1), got {u}");
    let total = kahan_sum(strategy.probabilities().iter().copied());
    let want = total.round() as usize;
    let mut picked = Vec::with_capacity(want);
    let mut cum = 0.0;
    let mut comp = 0.0;
    let mut next_target = u;
    for (i, &pi) in strategy.probabilities().iter().enumerate() {
        // Kahan-compensated cumulative sum.
        let y = pi - comp;
        let t = cum + y;
        comp = (t - cum) - y;
        cum = t;
        if picked.len() < want && cum > next_target {
            picked.push(i);
            next_target = u + picked.len() as f64;
        }
    }
    // Guard against a terminal rounding shortfall; marginals are not
    // measurably affected at 1e-12 mass error.
    if picked.len() < want {
        for (i, &pi) in strategy.probabilities().iter().enumerate() {
            if picked.len() == want {
                break;
            }
            if pi > 0.0 && !picked.contains(&i) {
                picked.push(i);
            }
        }
        picked.sort_unstable();
    }
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 0.5;

    #[test]
    fn reward_coefficient_limits_and_values() {
        assert_eq!(reward_coefficient(0.0, 1.0, 10.0), 1.0);
        assert_eq!(reward_coefficient(0.5, 1.0, 0.0), 1.0);
        let r = reward_coefficient(1.0, 1.0, 1.0);
        assert!((r - 0.632_120_558_8).abs() < 1e-9);
        // Depends only on the product lambda*delay*p.
        let r2 = reward_coefficient(0.2, 1.0, 5.0);
        assert!((r - r2).abs() < 1e-15);
        for &p in &[0.01, 0.3, 0.8, 1.0] {
            let v = reward_coefficient(p, 2.0, 3.0);
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn reward_inverse_round_trips_and_saturates() {
        assert_eq!(reward_coefficient_inverse(1.0, LAMBDA, 10.0), 0.0);
        let p = reward_coefficient_inverse(0.632_120_558_828_557_7, 1.0, 1.0);
        assert!((p - 1.0).abs() < 1e-9);
        // Below r(1 | d): clamps to 1. Above 1: clamps to 0.
        assert_eq!(reward_coefficient_inverse(1e-6, LAMBDA, 1.0), 1.0);
        assert_eq!(reward_coefficient_inverse(1.5, LAMBDA, 1.0), 0.0);
        let mut state = 42u64;
        let floor = reward_coefficient(1.0, LAMBDA, 10.0);
        for _ in 0..1000 {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            let y = floor + (1.0 - floor) * ((state >> 11) as f64 / (1u64 << 53) as f64);
            let p = reward_coefficient_inverse(y, LAMBDA, 10.0);
            let back = reward_coefficient(p, LAMBDA, 10.0);
            assert!((back - y).abs() < 1e-9, "round trip off: y={y} back={back}");
        }
    }

    #[test]
    fn revenue_matches_closed_forms() {
        let fees: Vec<f64> = (0..10).map(|i| 1.0 - i as f64 * 0.05).collect();
        let top = strategy_top_n(&fees, 4).unwrap();
        // delay -> 0: r -> 1, revenue -> sum of the top fees.
        let r = expected_revenue(&top, &top, &fees, LAMBDA, 1e-12).unwrap();
        let direct: f64 = fees[..4].iter().sum();
        assert!((r - direct).abs() < 1e-9);
        // Symmetric uniform play: (n/m) * phi(lambda*d*n/m) * sum fees.
        let uniform = strategy_random(10, 4).unwrap();
        let d = 1.0 / (LAMBDA * 0.4); // makes lambda*d*n/m = 1
        let r = expected_revenue(&uniform, &uniform, &fees, LAMBDA, d).unwrap();
        let expect = 0.4 * 0.632_120_558_8 * fees.iter().sum::<f64>();
        assert!((r - expect).abs() < 1e-8);
        let short = strategy_random(9, 4).unwrap();
        assert!(expected_revenue(&short, &uniform, &fees, LAMBDA, d).is_err());
    }

    #[test]
    fn random_strategy_shapes() {
        let s = strategy_random(10_000, 2000).unwrap();
        assert!(s.probabilities().iter().all(|&p| (p - 0.2).abs() < 1e-12));
        let full = strategy_random(7, 7).unwrap();
        assert!(full.probabilities().iter().all(|&p| p == 1.0));
        assert!(strategy_random(5, 6).is_err());
    }

    #[test]
    fn priority_strategy_water_fills() {
        // No clamping: pure proportionality.
        let p = strategy_priority(&[1.0, 1.0, 0.5, 0.5], 2).unwrap();
        let expect = [2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        for (got, want) in p.probabilities().iter().zip(expect) {
            assert!((got - want).abs() < 1e-9);
        }
        // One dominant fee clamps at 1; the rest share the remaining mass
        // proportionally.
        let mut fees = vec![10.0];
        fees.extend(std::iter::repeat(0.1).take(9));
        let p = strategy_priority(&fees, 2).unwrap();
        assert_eq!(p.probabilities()[0], 1.0);
        let rest: f64 = p.probabilities()[1..].iter().sum();
        assert!((rest - 1.0).abs() < 1e-9);
        for &q in &p.probabilities()[1..] {
            assert!((q - 1.0 / 9.0).abs() < 1e-9);
        }
        // Equal fees degenerate to uniform.
        let p = strategy_priority(&[0.3; 6], 3).unwrap();
        assert!(p.probabilities().iter().all(|&q| (q - 0.5).abs() < 1e-9));
        // All-zero fees: documented fallback to uniform.
        let p = strategy_priority(&[0.0; 4], 2).unwrap();
        assert!(p.probabilities().iter().all(|&q| (q - 0.5).abs() < 1e-12));
    }

    #[test]
    fn top_n_strategy_shapes() {
        let fees = [0.9, 0.8, 0.7, 0.2, 0.1];
        let p = strategy_top_n(&fees, 0).unwrap();
        assert!(p.probabilities().iter().all(|&q| q == 0.0));
        let p = strategy_top_n(&fees, 5).unwrap();
        assert!(p.probabilities().iter().all(|&q| q == 1.0));
        let p = strategy_top_n(&fees, 3).unwrap();
        assert_eq!(p.probabilities(), &[1.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(strategy_top_n(&[0.1, 0.9], 1).is_err(), "unsorted fees must be rejected");
    }

    #[test]
    fn equilibrium_on_homogeneous_fees_is_uniform() {
        let fees = vec![0.8; 200];
        let sol = equilibrium_strategy(&fees, 40, LAMBDA, 10.0).unwrap();
        for &q in sol.strategy.probabilities() {
            assert!((q - 0.2).abs() < 1e-9, "expected n/m, got {q}");
        }
        // Threshold equals f * r(n/m) on homogeneous fees.
        let expect_c = 0.8 * reward_coefficient(0.2, LAMBDA, 10.0);
        assert!((sol.threshold - expect_c).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_converges_to_top_n_for_small_delay() {
        let fees: Vec<f64> = (0..100).map(|i| 1.0 - i as f64 * 0.005).collect();
        let sol = equilibrium_strategy(&fees, 20, LAMBDA, 1e-4).unwrap();
        let top = strategy_top_n(&fees, 20).unwrap();
        for (got, want) in sol.strategy.probabilities().iter().zip(top.probabilities()) {
            assert!((got - want).abs() < 1e-6, "p={got} vs top-n {want}");
        }
    }

    #[test]
    fn equilibrium_becomes_fee_proportional_for_huge_delay() {
        // With lambda*delay*p >> 1 the reward coefficient decays like
        // 1/(lambda*delay*p), so the interior equilibrium condition
        // f_i * r(p_i) = c forces p_i proportional to f_i; meanwhile the
        // deviation gain from ANY strategy (uniform included) collapses.
        let fees: Vec<f64> = (0..100).map(|i| 1.0 - i as f64 * 0.009).collect();
        let sol = equilibrium_strategy(&fees, 20, 1.0, 1e4).unwrap();
        let p = sol.strategy.probabilities();
        let k0 = p[0] / fees[0];
        for (q, f) in p.iter().zip(&fees) {
            assert!(*q < 1.0, "huge delay must not clamp");
            assert!(
                (q / f - k0).abs() < 1e-4 * k0,
                "expected fee-proportional inclusion, got p={q} f={f}"
            );
        }
        // Uniform play's absolute deviation-gain bound collapses with
        // the delay, and the solver's own gain sits within it.
        let xi = crate::analytics::random_gap_xi(&fees, 20, 1.0, 1e4);
        assert!(xi < 0.01, "xi {xi} should collapse at huge delay");
        let uniform = strategy_random(100, 20).unwrap();
        let u_own = expected_revenue(&uniform, &uniform, &fees, 1.0, 1e4).unwrap();
        let (u_best, _) = best_response(&uniform, &fees, 1.0, 1e4).unwrap();
        assert!(u_best - u_own <= xi * (1.0 + 1e-9), "gain {} vs xi {xi}", u_best - u_own);
    }

    #[test]
    fn equilibrium_is_monotone_and_scale_invariant() {
        let fees: Vec<f64> = (0..64).map(|i| (1.0 - i as f64 * 0.012).max(0.05)).collect();
        let sol = equilibrium_strategy(&fees, 16, LAMBDA, 4.0).unwrap();
        let p = sol.strategy.probabilities();
        for w in p.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "p* must be non-increasing");
        }
        let scaled: Vec<f64> = fees.iter().map(|f| f * 37.5).collect();
        let sol2 = equilibrium_strategy(&scaled, 16, LAMBDA, 4.0).unwrap();
        for (a, b) in p.iter().zip(sol2.strategy.probabilities()) {
            assert!((a - b).abs() < 1e-9, "scaling must not move p*");
        }
        assert!((sol2.threshold - 37.5 * sol.threshold).abs() < 1e-6 * sol2.threshold);
    }

    #[test]
    fn equilibrium_admits_no_profitable_deviation() {
        // Certificate on a handful of random fee vectors; the acceptance
        // suite runs the full-scale version.
        let mut state = 0xabcdef12_u64;
        let mut unit = move || {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..5 {
            let mut fees: Vec<f64> = (0..50).map(|_| 0.05 + 0.95 * unit()).collect();
            fees.sort_by(|a, b| b.total_cmp(a));
            let sol = equilibrium_strategy(&fees, 10, LAMBDA, 6.0).unwrap();
            let own =
                expected_revenue(&sol.strategy, &sol.strategy, &fees, LAMBDA, 6.0).unwrap();
            let (best, _) = best_response(&sol.strategy, &fees, LAMBDA, 6.0).unwrap();
            assert!(
                best <= own * (1.0 + 1e-6),
                "profitable deviation: best {best} vs own {own}"
            );
        }
    }

    #[test]
    fn equilibrium_zero_fee_entries_get_zero() {
        let fees = [1.0, 0.8, 0.5, 0.0, 0.0];
        let sol = equilibrium_strategy(&fees, 2, LAMBDA, 2.0).unwrap();
        assert_eq!(sol.strategy.probabilities()[3], 0.0);
        assert_eq!(sol.strategy.probabilities()[4], 0.0);
        assert!(equilibrium_strategy(&fees, 4, LAMBDA, 2.0).is_err());
    }

    #[test]
    fn systematic_sampling_is_exact_in_count_and_marginals() {
        let fees: Vec<f64> = (0..40).map(|i| 1.0 - i as f64 * 0.02).collect();
        let strat = strategy_priority(&fees, 8).unwrap();
        let mut counts = vec![0u32; 40];
        let trials = 20_000;
        let mut state = 7u64;
        for _ in 0..trials {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let picks = systematic_sample(&strat, u);
            assert_eq!(picks.len(), 8);
            let mut seen = std::collections::HashSet::new();
            for i in picks {
                assert!(seen.insert(i), "duplicate slot selected");
                counts[i] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let p_hat = c as f64 / trials as f64;
            let p = strat.probabilities()[i];
            let se = (p * (1.0 - p) / trials as f64).sqrt().max(1e-4);
            assert!(
                (p_hat - p).abs() < 5.0 * se,
                "marginal off at {i}: {p_hat} vs {p}"
            );
        }
    }
}
