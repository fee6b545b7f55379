//! Survival probabilities for runs of failures.
//!
//! Two regimes are covered. In the homogeneous one, `n` independent
//! trials each fail with probability `x`, and `g_n` is the probability
//! that no `k` consecutive trials all fail. It satisfies
//!
//! ```text
//! g_n = (1 - x) (g_{n-1} + x g_{n-2} + ... + x^(k-1) g_{n-k}),
//! ```
//!
//! whose characteristic equation is solved exactly by the involution
//! value `f_{k,k+1}(x)`: substituting `lambda = f` and summing the
//! geometric factor turns the equation into
//! `f^k - f^(k+1) = x^k - x^(k+1)`. That root dominates, giving the
//! two-sided estimate `f^n <= g_n <= f^(n-k+1)`.
//!
//! In the strengthening regime, trial `n` instead fails with probability
//! `(1-s)^n`, and the event of interest is that no `k` consecutive
//! trials ever all fail. Its probability is computed by a normalized
//! transfer recursion on the trailing-run length, with the remaining
//! risk after the last computed step bounded by a union bound over the
//! runs that could still complete; conditioning on survival so far can
//! only shrink that risk, since survival is an increasing event and a
//! future run is a decreasing one. The log-probability scales like
//! `-lambda_k / s` with `lambda_k = pi^2 / (3 k (k+1))`, the same
//! constant the integral module produces as `pi^2/(3ab)` at
//! `(a,b) = (k, k+1)`.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::CoreError;
use crate::involution::{f_eval, ExponentPair};
use crate::math;

/// Limiting constant `pi^2 / (3 k (k+1))` of `-s log P` as `s -> 0`.
pub fn lambda_k(k: u32) -> Result<f64, CoreError> {
    if k == 0 {
        return Err(CoreError::BadParameter {
            what: "run length k must be at least 1",
        });
    }
    let kf = k as f64;
    Ok(math::PI * math::PI / (3.0 * kf * (kf + 1.0)))
}

/// Relative residual of the characteristic identity
/// `f^k = (1-x)(f^(k-1) + x f^(k-2) + ... + x^(k-1))` at `f = f_{k,k+1}(x)`.
pub fn characteristic_residual(k: u32, x: f64) -> Result<f64, CoreError> {
    if k == 0 {
        return Err(CoreError::BadParameter {
            what: "run length k must be at least 1",
        });
    }
    if !(0.0 < x && x < 1.0) {
        return Err(CoreError::OutOfDomain {
            what: "characteristic_residual failure probability",
            value: x,
        });
    }
    let pair = ExponentPair::consecutive(k);
    let f = f_eval(pair, x, 1e-13)?.value;
    let fk = math::pow(f, k as f64);
    let mut sum = 0.0;
    let mut xp = 1.0;
    for j in 0..k {
        sum += xp * math::pow(f, (k - 1 - j) as f64);
        xp *= x;
    }
    let rhs = (1.0 - x) * sum;
    Ok(math::abs(fk - rhs) / fk)
}

/// Probabilities `g_0, ..., g_n` that no `k` consecutive failures occur
/// among the first `m` of a sequence of independent trials, each failing
/// with probability `x`. Generic so the same recursion runs in `f64` and
/// in exact rational arithmetic.
pub fn run_free_probs<T>(k: u32, x: &T, n: usize) -> Result<Vec<T>, CoreError>
where
    T: Clone
        + Zero
        + One
        + core::ops::Add<Output = T>
        + core::ops::Sub<Output = T>
        + core::ops::Mul<Output = T>,
{
    if k == 0 {
        return Err(CoreError::BadParameter {
            what: "run length k must be at least 1",
        });
    }
    let k = k as usize;
    let omx = T::one() - x.clone();
    let mut g: Vec<T> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        if m < k {
            g.push(T::one());
            continue;
        }
        let mut acc = T::zero();
        let mut xp = T::one();
        for j in 0..k {
            acc = acc + xp.clone() * g[m - 1 - j].clone();
            xp = xp * x.clone();
        }
        g.push(omx.clone() * acc);
    }
    Ok(g)
}

/// Largest trial count accepted by [`run_free_prob_exhaustive`].
pub const MAX_EXHAUSTIVE_TRIALS: u32 = 26;

/// Exact reference value of `g_n` by enumerating all `2^n` outcome
/// patterns; bit `i` set means trial `i` failed. Survivor counts are
/// tallied by failure count, so the result is an exact rational.
pub fn run_free_prob_exhaustive(k: u32, x: &BigRational, n: u32) -> Result<BigRational, CoreError> {
    if k == 0 {
        return Err(CoreError::BadParameter {
            what: "run length k must be at least 1",
        });
    }
    if n > MAX_EXHAUSTIVE_TRIALS {
        return Err(CoreError::BadParameter {
            what: "exhaustive enumeration is limited to 26 trials",
        });
    }
    let mut tally = vec![0u64; n as usize + 1];
    for mask in 0u64..(1u64 << n) {
        let mut m = mask;
        for _ in 1..k {
            m &= m << 1;
        }
        if m == 0 {
            tally[mask.count_ones() as usize] += 1;
        }
    }
    // Sum tally[j] x^j (1-x)^(n-j) with power tables built incrementally.
    let omx = BigRational::one() - x.clone();
    let mut x_pows = Vec::with_capacity(n as usize + 1);
    let mut omx_pows = Vec::with_capacity(n as usize + 1);
    x_pows.push(BigRational::one());
    omx_pows.push(BigRational::one());
    for j in 1..=n as usize {
        let xl = x_pows[j - 1].clone() * x.clone();
        x_pows.push(xl);
        let ol = omx_pows[j - 1].clone() * omx.clone();
        omx_pows.push(ol);
    }
    let mut total = BigRational::zero();
    for (j, &count) in tally.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let c = BigRational::from_integer(BigInt::from(count));
        total += c * x_pows[j].clone() * omx_pows[n as usize - j].clone();
    }
    Ok(total)
}

/// Certified estimate of the log survival probability in the
/// strengthening regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalEstimate {
    /// `log P(no k-run among the first `steps` trials)`. The true
    /// all-time log-probability lies in
    /// `[log_prob + log(1 - conditional_tail), log_prob]`.
    pub log_prob: f64,
    /// Upper bound on the conditional probability that a run still
    /// completes after the last computed step.
    pub conditional_tail: f64,
    /// Number of trials processed.
    pub steps: u64,
}

/// Hard cap on DP steps; reaching it yields `DidNotCertify`.
const MAX_SURVIVAL_STEPS: u64 = 200_000_000;

/// Steps between exact re-anchorings of the running failure probability.
const REANCHOR_EVERY: u64 = 4096;

/// Log probability that a strengthening sequence (trial `n` fails with
/// probability `(1-s)^n`) never produces `k` consecutive failures,
/// certified to relative tail `rel_tol`.
pub fn survival_log(k: u32, s: f64, rel_tol: f64) -> Result<SurvivalEstimate, CoreError> {
    survival_impl(k, s, rel_tol, false)
}

/// Same as [`survival_log`] but additionally requiring the first trial
/// to succeed. With failure probabilities `x^n` this is the probability
/// that a random partition (geometric part multiplicities) avoids both
/// the part 1 and every pair of consecutive part values when `k = 2`,
/// which factors as `prod (1-x^(6j+1))(1-x^(6j+5))`.
pub fn survival_log_forced_start(k: u32, s: f64, rel_tol: f64) -> Result<SurvivalEstimate, CoreError> {
    survival_impl(k, s, rel_tol, true)
}

fn survival_impl(
    k: u32,
    s: f64,
    rel_tol: f64,
    forced_start: bool,
) -> Result<SurvivalEstimate, CoreError> {
    if k == 0 {
        return Err(CoreError::BadParameter {
            what: "run length k must be at least 1",
        });
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(CoreError::OutOfDomain {
            what: "survival strengthening rate",
            value: s,
        });
    }
    if !(rel_tol > 0.0 && rel_tol < 0.5) {
        return Err(CoreError::BadParameter {
            what: "relative tolerance must be in (0, 0.5)",
        });
    }

    let kf = k as f64;
    let ln_x = math::ln_1p(-s);
    // Smallest N with T(N) <= rel_tol, where
    //   T(N) = (1-s)^(k(N-k+2) + k(k-1)/2) / (1 - (1-s)^k)
    // bounds the conditional risk of a run completing after step N.
    let ln_denom = math::ln(-math::exp_m1(kf * ln_x));
    let n_needed = (math::ln(rel_tol) + ln_denom) / (kf * ln_x) + (kf - 2.0) - (kf - 1.0) / 2.0;
    let n_steps = if n_needed.is_finite() && n_needed > 0.0 {
        (math::floor(n_needed) as u64).saturating_add(1)
    } else {
        1
    }
    .max(k as u64);
    if n_steps > MAX_SURVIVAL_STEPS {
        return Err(CoreError::DidNotCertify {
            what: "survival_log step budget",
            value: f64::NAN,
            achieved: n_steps as f64,
            requested: MAX_SURVIVAL_STEPS as f64,
        });
    }

    let log_p = dp_log_over(k, ln_x, n_steps, forced_start);

    let ln_tail = (kf * (n_steps as f64 - kf + 2.0) + kf * (kf - 1.0) / 2.0) * ln_x - ln_denom;
    Ok(SurvivalEstimate {
        log_prob: log_p,
        conditional_tail: math::exp(ln_tail),
        steps: n_steps,
    })
}

/// Log probability that the first `n` trials of a strengthening sequence
/// (trial `i` fails with probability `(1 - s)^i`) contain no run of `k`
/// consecutive failures. Unlike [`survival_log`] this is an exact finite
/// horizon, so no tail estimate accompanies the value.
pub fn survival_log_finite(k: u32, s: f64, n: u64) -> Result<f64, CoreError> {
    if k == 0 {
        return Err(CoreError::BadParameter {
            what: "run length k must be at least 1",
        });
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(CoreError::OutOfDomain {
            what: "survival strengthening rate",
            value: s,
        });
    }
    if n > MAX_SURVIVAL_STEPS {
        return Err(CoreError::DidNotCertify {
            what: "survival_log_finite step budget",
            value: f64::NAN,
            achieved: n as f64,
            requested: MAX_SURVIVAL_STEPS as f64,
        });
    }
    Ok(dp_log_over(k, math::ln_1p(-s), n, false))
}

/// Runs the no-`k`-run DP over exactly `n_steps` trials. State `w[j]`
/// holds the probability share of ending on a failure run of length `j`;
/// the shares are renormalized each step so products stay in range, with
/// the log of each normalizer accumulated into the returned value.
fn dp_log_over(k: u32, ln_x: f64, n_steps: u64, forced_start: bool) -> f64 {
    let mut w = vec![0.0f64; k as usize];
    w[0] = 1.0;
    let mut log_p = 0.0f64;
    let x_base = math::exp(ln_x);
    let mut x_n = 0.0f64;
    for n in 1..=n_steps {
        if n % REANCHOR_EVERY == 1 {
            x_n = math::exp(n as f64 * ln_x);
        } else {
            x_n *= x_base;
        }
        if n == 1 && forced_start {
            log_p += math::ln(1.0 - x_n);
            continue;
        }
        let alive: f64 = w.iter().sum();
        for j in (1..k as usize).rev() {
            w[j] = w[j - 1] * x_n;
        }
        w[0] = alive * (1.0 - x_n);
        let total: f64 = w.iter().sum();
        log_p += math::ln(total);
        for wj in w.iter_mut() {
            *wj /= total;
        }
    }
    log_p
}

/// Rigorous two-sided log bounds from block coarsening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichBounds {
    pub log_lower: f64,
    pub log_upper: f64,
    /// Trials per block, `floor(s^(-1/2))`.
    pub block_len: u64,
    /// Blocks evaluated before the certified tail took over.
    pub blocks: u64,
}

/// Two-sided bounds on the all-time log survival probability of
/// [`survival_log`], built only from involution evaluations.
///
/// Trials are grouped into blocks of `r = floor(s^(-1/2))` steps, block
/// `i` covering trials `(i-1)r + 1` through `ir`, with `q = -log(1-s)`.
/// For the upper bound, every failure probability in block `i` is
/// lowered to its in-block minimum `x_i = e^(-irq)` and runs crossing
/// block boundaries are ignored, so each block contributes at most
/// `f(x_i)^(r-k+1)`. For the lower bound, the first trial of each block
/// is forced to succeed (cutting any cross-boundary run) and the other
/// failure probabilities are raised to the in-block maximum
/// `y_i = e^(-q((i-1)r+1))`, giving at least `(1-y_i) f(y_i)^(r-1)` per
/// block. Dropped upper-bound factors only strengthen the bound; the
/// dropped lower-bound tail is repaid with the certified estimates
/// `-log f(e^(-z)) <= 5 e^(-kz)` (valid once
/// `e^(-kz) <= 1/(8(k+1) + 20)`, and spot-checked at the cut) and
/// `-log(1-w) <= w/(1-w)`.
pub fn sandwich_log_bounds(k: u32, s: f64) -> Result<SandwichBounds, CoreError> {
    if k == 0 {
        return Err(CoreError::BadParameter {
            what: "run length k must be at least 1",
        });
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(CoreError::OutOfDomain {
            what: "sandwich strengthening rate",
            value: s,
        });
    }
    let r = math::floor(math::pow(s, -0.5)) as u64;
    if r < (k as u64) + 1 {
        return Err(CoreError::NotApplicable {
            what: "block sandwich needs blocks longer than the run length (s too large for this k)",
        });
    }
    let kf = k as f64;
    let rf = r as f64;
    let q = -math::ln_1p(-s);
    let pair = ExponentPair::consecutive(k);

    // Validity threshold for the exponential bound on -log f(e^-z).
    let u_ok = 1.0 / (8.0 * (kf + 1.0) + 20.0);

    let mut log_upper = 0.0f64;
    let mut log_lower = 0.0f64;
    let mut blocks: u64 = 0;
    loop {
        blocks += 1;
        let z_min = blocks as f64 * rf * q;
        let z_max = ((blocks - 1) as f64 * rf + 1.0) * q;
        let x_i = math::exp(-z_min);
        let y_i = math::exp(-z_max);
        let ln_f_x = math::ln(f_eval(pair, x_i, 1e-13)?.value);
        let ln_f_y = math::ln(f_eval(pair, y_i, 1e-13)?.value);
        log_upper += (rf - kf + 1.0) * ln_f_x;
        log_lower += math::ln_1p(-y_i) + (rf - 1.0) * ln_f_y;
        // Stop once the per-block contribution is negligible against the
        // accumulated bound and the tail estimates are in their domain.
        let contrib = rf * (-ln_f_y) + y_i;
        let in_domain = math::pow(y_i, kf) <= u_ok;
        if in_domain && contrib <= 1e-16 * (1.0 + math::abs(log_lower)) {
            break;
        }
        if blocks >= 100_000_000 {
            return Err(CoreError::DidNotCertify {
                what: "sandwich block budget",
                value: log_upper,
                achieved: contrib,
                requested: 1e-16,
            });
        }
    }

    // Tail of the lower bound, over blocks past the cut: the forced
    // successes contribute sum -log(1 - y_i) and the raised-probability
    // runs contribute (r-1) sum -log f(y_i), both bounded geometrically
    // from the first dropped block's y value.
    let y_t = math::exp(-((blocks as f64) * rf + 1.0) * q);
    let h_at_cut = -math::ln(f_eval(pair, y_t, 1e-13)?.value);
    if h_at_cut > 5.0 * math::pow(y_t, kf) {
        return Err(CoreError::InvariantViolated {
            what: "exponential tail bound for -log f failed its spot check",
        });
    }
    let h_tail = 5.0 * math::pow(y_t, kf) / -math::exp_m1(-kf * rf * q);
    let one_tail = y_t / ((1.0 - y_t) * -math::exp_m1(-rf * q));
    log_lower -= (rf - 1.0) * h_tail + one_tail;

    Ok(SandwichBounds {
        log_lower,
        log_upper,
        block_len: r,
        blocks,
    })
}
