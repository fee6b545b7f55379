//! The logarithmic series attached to the involution `f_{a,a+1}`.
//!
//! With `b = a + 1`, `u(x) = x^a - x^b` and `Stirling ratio`
//! `c_l = Gamma(b l) / (Gamma(a l) l!)`, the series
//!
//! ```text
//! F(x) = sum_{l >= 1} c_l u(x)^l / (a l)
//! ```
//!
//! converges on `[0,1]` minus the peak point `rho = a/b` and sums to
//! `-log f(x)` below `rho` and to `-log x` above it; both branches meet
//! at the limit value `-log rho`. Term `l` behaves like
//! `sqrt(a/(2 pi b)) l^(-3/2) v^l / a` with `v = u / u_max`, so away from
//! `rho` the tail is certifiably geometric while at `rho` itself (`v = 1`)
//! no useful rate survives.
//!
//! The module also carries the exact rational identity behind the
//! logarithmic form: the alternating coefficient sum
//! `b_m = sum_l (-1)^(m-l) / (l! (m-l)!) prod_{i<m} (b l - m + i)`
//! collapses to `1/m` for every integer `b >= 2`.

use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::CoreError;
use crate::involution::ExponentPair;
use crate::math;

/// A partial series sum with its certified tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    /// Upper bound on the discarded tail (all terms are nonnegative).
    pub tail_bound: f64,
    pub terms: u64,
}

/// Hard cap on summed terms. Certifying a 4e-9 tail at distance 1e-3
/// from the peak takes about 2.5e6 terms for a = 1; the cap leaves
/// comfortable headroom before declaring the tolerance unreachable.
pub const MAX_SERIES_TERMS: u64 = 8_000_000;

/// Terms between exact recomputations of the running term from
/// log-gamma, bounding multiplicative drift of the recurrence.
const ANCHOR_EVERY: u64 = 1 << 16;

/// `log` of term `l` via log-gamma: `c_l u^l / (a l)`.
fn ln_term(a: f64, b: f64, u_ln: f64, l: u64) -> f64 {
    let lf = l as f64;
    math::ln_gamma(b * lf) - math::ln_gamma(a * lf) - math::ln_gamma(lf + 1.0)
        + lf * u_ln
        - math::ln(a * lf)
}

/// Exact one-step term ratio divided by `u`:
/// `R_l = [Gamma(b l + b) / Gamma(b l)] / [Gamma(a l + a) / Gamma(a l)]
///        * l / (l+1)^2`.
///
/// `R_l` increases to `b^b / a^a`, which makes `v = u b^b / a^a` a sound
/// geometric bound on every later ratio (exercised in tests).
fn ratio_factor(a: f64, b: f64, int_ab: Option<(u32, u32)>, l: u64) -> f64 {
    let lf = l as f64;
    let gamma_step = match int_ab {
        Some((ai, bi)) => {
            let mut num = 1.0;
            for j in 0..bi as u64 {
                num *= (bi as u64 * l + j) as f64;
            }
            let mut den = 1.0;
            for j in 0..ai as u64 {
                den *= (ai as u64 * l + j) as f64;
            }
            num / den
        }
        None => math::exp(
            math::ln_gamma(b * lf + b) - math::ln_gamma(b * lf) - math::ln_gamma(a * lf + a)
                + math::ln_gamma(a * lf),
        ),
    };
    gamma_step * lf / ((lf + 1.0) * (lf + 1.0))
}

/// Sum the series at `x` until the certified tail drops below `tol`.
///
/// `x = rho` exactly is answered by the limit value `-log rho` (the series
/// converges there too slowly for any finite certificate). Elsewhere the
/// sum stops once `term * v / (1 - v) <= tol`; if the cap is reached
/// first, the error carries the partial value and the bound achieved.
pub fn series_sum(a: f64, x: f64, tol: f64) -> Result<SeriesSum, CoreError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(CoreError::BadParameter {
            what: "series_sum requires a > 0",
        });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(CoreError::OutOfDomain {
            what: "series_sum",
            value: x,
        });
    }
    let b = a + 1.0;
    let pair = ExponentPair::new(a, b).expect("a > 0 gives a valid pair");
    let rho = pair.rho();
    if x == rho {
        return Ok(SeriesSum {
            value: -math::ln(rho),
            tail_bound: 0.0,
            terms: 0,
        });
    }
    let u = pair.power_gap(x);
    if u == 0.0 {
        return Ok(SeriesSum {
            value: 0.0,
            tail_bound: 0.0,
            terms: 0,
        });
    }
    let u_max = pair.peak();
    let one_minus_v = (u_max - u) / u_max;
    let v = u / u_max;

    let int_ab = if a == math::floor(a) && a <= 64.0 {
        Some((a as u32, a as u32 + 1))
    } else {
        None
    };
    let u_ln = math::ln(u);

    // Kahan-compensated accumulation; term magnitudes span many orders.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let add = |sum: &mut f64, comp: &mut f64, t: f64| {
        let y = t - *comp;
        let s = *sum + y;
        *comp = (s - *sum) - y;
        *sum = s;
    };

    let mut term = u; // l = 1: c_1 = 1 for every a, so t_1 = u.
    add(&mut sum, &mut comp, term);
    let mut l: u64 = 1;
    loop {
        let tail = if one_minus_v > 0.0 {
            term * v / one_minus_v
        } else {
            f64::INFINITY
        };
        if tail <= tol || term == 0.0 {
            return Ok(SeriesSum {
                value: sum,
                tail_bound: if term == 0.0 { 0.0 } else { tail },
                terms: l,
            });
        }
        if l >= MAX_SERIES_TERMS {
            return Err(CoreError::DidNotCertify {
                what: "series_sum",
                value: sum,
                achieved: tail,
                requested: tol,
            });
        }
        term *= u * ratio_factor(a, b, int_ab, l);
        l += 1;
        if l.is_multiple_of(ANCHOR_EVERY) {
            term = math::exp(ln_term(a, b, u_ln, l));
        }
        add(&mut sum, &mut comp, term);
    }
}

/// Incrementally built factorial table `0! ..= n!`.
fn factorial_table(n: usize) -> Vec<BigUint> {
    let mut table = Vec::with_capacity(n + 1);
    table.push(BigUint::one());
    for i in 1..=n {
        let next = &table[i - 1] * BigUint::from(i);
        table.push(next);
    }
    table
}

/// The alternating coefficient sum
///
/// ```text
/// b_m = sum_{l=1}^{m} (-1)^(m-l) / (l! (m-l)!) * prod_{i=1}^{m-1} (b l - m + i)
/// ```
///
/// in exact rational arithmetic, for integer `b >= 2`, `m >= 1`. Terms
/// with `b l <= m - 1` contain the factor zero and drop out; the rest use
/// `prod = (b l - 1)! / (b l - m)!`. The value reduces to `1/m`.
pub fn log_series_coefficient(b: u32, m: u32) -> Result<BigRational, CoreError> {
    if b < 2 || m < 1 {
        return Err(CoreError::BadParameter {
            what: "log_series_coefficient requires integer b >= 2 and m >= 1",
        });
    }
    let m = m as usize;
    let b = b as usize;
    let fact = factorial_table(b * m);

    // S = sum (-1)^(m-l) C(m,l) (bl-1)!/(bl-m)!, so that b_m = S / m!.
    let mut s = BigInt::zero();
    let mut binom = BigUint::one(); // C(m, m)
    for l in (1..=m).rev() {
        if b * l >= m {
            let ff = &fact[b * l - 1] / &fact[b * l - m];
            let signed = BigInt::from(&binom * ff);
            if (m - l).is_multiple_of(2) {
                s += signed;
            } else {
                s -= signed;
            }
        }
        // C(m, l-1) = C(m, l) * l / (m - l + 1).
        binom = binom * BigUint::from(l) / BigUint::from(m - l + 1);
    }
    Ok(BigRational::new(s, BigInt::from(fact[m].clone())))
}
