//! Shared numeric kernels.
//!
//! Everything here is a pure function. The central object is
//! `phi(x) = (1 - e^-x) / x`, which shows up in the reward coefficient,
//! the approximation gaps and the top-n uniqueness threshold. `phi` is
//! strictly decreasing on [0, inf) with phi(0) = 1 and phi(x) -> 0, so its
//! inverse is well defined on (0, 1].

/// Absolute tolerance used when inverting `phi` by bisection.
pub const PHI_INV_TOL: f64 = 1e-13;

/// `(1 - e^-x) / x`, extended continuously with `phi(0) = 1`.
///
/// A Taylor expansion is used for small `x` to avoid the catastrophic
/// cancellation in `1 - e^-x`.
pub fn phi(x: f64) -> f64 {
    debug_assert!(x >= 0.0, "phi domain is x >= 0, got {x}");
    if x < 1e-6 {
        // 1 - x/2 + x^2/6 - x^3/24; the x^3 term is below f64 epsilon here.
        1.0 - x / 2.0 + x * x / 6.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Derivative of `phi`, used by the guarded Newton steps in the solver.
pub fn phi_prime(x: f64) -> f64 {
    if x < 1e-5 {
        -0.5 + x / 3.0 - x * x / 8.0
    } else {
        let e = (-x).exp();
        (e * (x + 1.0) - 1.0) / (x * x)
    }
}

/// Inverse of `phi` on (0, 1]: returns the `x >= 0` with `phi(x) = y`.
///
/// Values `y >= 1` map to 0. Panics only on `y <= 0` or NaN, which no
/// caller can produce from valid inputs.
pub fn phi_inverse(y: f64) -> f64 {
    assert!(y > 0.0 && y.is_finite(), "phi_inverse domain is (0, 1], got {y}");
    if y >= 1.0 {
        return 0.0;
    }
    // Bracket the root: phi(x) ~ 1/x for large x, so 2/y always overshoots.
    let mut lo = 0.0_f64;
    let mut hi = (2.0 / y).max(1.0);
    while phi(hi) > y {
        hi *= 2.0;
    }
    // Bisection: phi is strictly decreasing, so the invariant is
    // phi(lo) >= y >= phi(hi).
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < PHI_INV_TOL * mid.max(1.0) {
            break;
        }
        if phi(mid) >= y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of a strictly decreasing function `f` on `[lo, hi]` by bisection,
/// to absolute tolerance `tol` on the argument.
///
/// Requires `f(lo) >= 0 >= f(hi)`; returns an error carrying the endpoint
/// values otherwise so the caller can report the failed bracket.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64, (f64, f64)> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo < 0.0 || fhi > 0.0 {
        return Err((flo, fhi));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval no longer splittable in f64
        }
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Poisson CDF `P(K <= k)` for rate `mu`, via the stable term recurrence
/// `t_{j+1} = t_j * mu / (j+1)` instead of naive factorials.
pub fn poisson_cdf(k: u64, mu: f64) -> f64 {
    assert!(mu >= 0.0, "poisson rate must be non-negative");
    if mu == 0.0 {
        return 1.0;
    }
    // For large mu the leading term e^-mu underflows; accumulate in log
    // space from the largest term instead. mu <= 700 covers every use in
    // this crate (mu = lambda*tau is tiny), but stay correct regardless.
    if mu > 700.0 {
        let mut log_t = -mu; // log of term j=0
        let mut terms = Vec::with_capacity(k as usize + 1);
        terms.push(log_t);
        for j in 0..k {
            log_t += mu.ln() - ((j + 1) as f64).ln();
            terms.push(log_t);
        }
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        return (max + sum.ln()).exp().min(1.0);
    }
    let mut term = (-mu).exp();
    let mut acc = term;
    for j in 0..k {
        term *= mu / (j + 1) as f64;
        acc += term;
    }
    acc.min(1.0)
}
