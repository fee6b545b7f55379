//! The decreasing involution `f_{a,b}` of the unit interval.
//!
//! For exponents `0 < a < b` let `phi(x) = x^a - x^b`. On `[0,1]` the map
//! `phi` rises from 0 to its peak at `rho = exp(-(log b - log a)/(b-a))`
//! and falls back to 0. The equation
//!
//! ```text
//! phi(f(x)) = phi(x)
//! ```
//!
//! has exactly one solution on the branch opposite `x`, and that solution
//! `f(x)` is a decreasing involution: `f(0) = 1`, `f(1) = 0`,
//! `f(rho) = rho`, `f(f(x)) = x`.
//!
//! This module evaluates `f` by bracketed bisection with Newton polishing
//! on the correct branch, certifying a residual `|phi(f(x)) - phi(x)|`
//! below a caller-supplied tolerance. The entropy analogue `f~` solving
//! `-y log y = -x log x` gets the same treatment.

use crate::error::CoreError;
use crate::math;

/// Exponent pair `0 < a < b` defining `phi(x) = x^a - x^b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentPair {
    a: f64,
    b: f64,
}

impl ExponentPair {
    /// New pair; requires `0 < a < b`, both finite.
    pub fn new(a: f64, b: f64) -> Result<Self, CoreError> {
        if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
            return Err(CoreError::BadParameter {
                what: "exponent pair requires 0 < a < b, finite",
            });
        }
        Ok(ExponentPair { a, b })
    }

    /// The pair `(k, k+1)`, the case governing the gap process.
    pub fn consecutive(k: u32) -> Self {
        ExponentPair {
            a: k as f64,
            b: (k + 1) as f64,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Argmax of `phi` on `[0,1]`: `exp(-(log b - log a)/(b-a))`.
    ///
    /// Equals `a/b` whenever `b = a + 1`.
    pub fn rho(&self) -> f64 {
        math::exp(-(math::ln(self.b) - math::ln(self.a)) / (self.b - self.a))
    }

    /// Peak value `phi(rho)`; equals `a^a / b^b` when `b = a + 1`.
    pub fn peak(&self) -> f64 {
        self.power_gap(self.rho())
    }

    /// `phi(x) = x^a - x^b`, evaluated as `x^a * (1 - x^(b-a))` through
    /// `expm1` so no cancellation occurs near `x = 1`.
    pub fn power_gap(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 0.0;
        }
        let lx = math::ln(x);
        math::exp(self.a * lx) * -math::exp_m1((self.b - self.a) * lx)
    }

    /// `phi'(x) = a x^(a-1) - b x^(b-1)`.
    pub fn power_gap_deriv(&self, x: f64) -> f64 {
        if x <= 0.0 {
            // Limit as x -> 0+: a for a = 1, 0 for a > 1, +inf for a < 1.
            return if self.a == 1.0 {
                1.0
            } else if self.a > 1.0 {
                0.0
            } else {
                f64::INFINITY
            };
        }
        let lx = math::ln(x);
        self.a * math::exp((self.a - 1.0) * lx) - self.b * math::exp((self.b - 1.0) * lx)
    }

    /// `phi''(x) = a(a-1) x^(a-2) - b(b-1) x^(b-2)`.
    pub fn power_gap_second_deriv(&self, x: f64) -> f64 {
        let lx = math::ln(x);
        self.a * (self.a - 1.0) * math::exp((self.a - 2.0) * lx)
            - self.b * (self.b - 1.0) * math::exp((self.b - 2.0) * lx)
    }

    /// `psi(x) = phi''(x) / phi'(x)^2`, the curvature ratio entering the
    /// concavity argument. Singular at `x = rho`.
    pub fn psi(&self, x: f64) -> f64 {
        let d = self.power_gap_deriv(x);
        self.power_gap_second_deriv(x) / (d * d)
    }
}

/// One evaluation of an implicitly defined function: the value together
/// with the certified equation residual and the iteration count spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuncSample {
    pub value: f64,
    /// `|phi(value) - phi(x)|` (resp. the entropy-equation residual).
    pub residual: f64,
    pub iterations: u32,
}

const MAX_SOLVER_ITERS: u32 = 200;

/// Bracketed root of `g` on `[lo, hi]`, where `g(lo)` and `g(hi)` have
/// opposite signs (either may be zero). Bisection with Newton steps taken
/// whenever they stay inside the current bracket and shrink the residual.
fn bracketed_root(
    mut g: impl FnMut(f64) -> f64,
    mut dg: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
) -> (f64, f64, u32) {
    let mut flo = g(lo);
    let mut fhi = g(hi);
    let mut iters = 2;
    if flo == 0.0 {
        return (lo, 0.0, iters);
    }
    if fhi == 0.0 {
        return (hi, 0.0, iters);
    }
    debug_assert!(flo.signum() != fhi.signum());

    // Best point seen so far.
    let (mut best, mut fbest) = if math::abs(flo) <= math::abs(fhi) {
        (lo, flo)
    } else {
        (hi, fhi)
    };

    let mut cand = 0.5 * (lo + hi);
    while iters < MAX_SOLVER_ITERS {
        let fc = g(cand);
        iters += 1;
        if math::abs(fc) < math::abs(fbest) {
            best = cand;
            fbest = fc;
        }
        if fc == 0.0 {
            break;
        }
        if fc.signum() == flo.signum() {
            lo = cand;
            flo = fc;
        } else {
            hi = cand;
            fhi = fc;
        }
        let width = hi - lo;
        if width <= f64::EPSILON * (math::abs(lo) + math::abs(hi) + f64::MIN_POSITIVE) {
            break;
        }
        // Prefer a Newton step from the best point when it lands strictly
        // inside the bracket; otherwise bisect.
        let d = dg(best);
        let newton = best - fbest / d;
        cand = if d.is_finite() && d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if cand == lo || cand == hi {
            cand = 0.5 * (lo + hi);
            if cand == lo || cand == hi {
                break;
            }
        }
    }
    let _ = fhi;
    (best, math::abs(fbest), iters)
}

/// Evaluate `f_{a,b}(x)`: the solution of `phi(y) = phi(x)` on the branch
/// of `phi` opposite to `x`.
///
/// `x` must lie in `[0,1]`. The returned sample certifies
/// `residual <= tol`; otherwise the call reports how far it got.
pub fn f_eval(pair: ExponentPair, x: f64, tol: f64) -> Result<FuncSample, CoreError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(CoreError::OutOfDomain {
            what: "f_eval",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(FuncSample {
            value: 1.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    if x == 1.0 {
        return Ok(FuncSample {
            value: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let rho = pair.rho();
    if x == rho {
        return Ok(FuncSample {
            value: rho,
            residual: 0.0,
            iterations: 0,
        });
    }
    let t = pair.power_gap(x);
    let (lo, hi) = if x < rho { (rho, 1.0) } else { (0.0, rho) };
    let (value, residual, iterations) = bracketed_root(
        |y| pair.power_gap(y) - t,
        |y| pair.power_gap_deriv(y),
        lo,
        hi,
    );
    if residual <= tol {
        Ok(FuncSample {
            value,
            residual,
            iterations,
        })
    } else {
        Err(CoreError::DidNotCertify {
            what: "f_eval",
            value,
            achieved: residual,
            requested: tol,
        })
    }
}

/// Shannon-entropy summand `-x log x`, continuously extended by 0 at 0.
pub fn entropy_term(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * math::ln(x)
}

/// Evaluate the entropy involution `f~(x)`: the decreasing solution of
/// `-y log y = -x log x`, with fixed point `1/e`.
pub fn f_tilde_eval(x: f64, tol: f64) -> Result<FuncSample, CoreError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(CoreError::OutOfDomain {
            what: "f_tilde_eval",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(FuncSample {
            value: 1.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    if x == 1.0 {
        return Ok(FuncSample {
            value: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let e_inv = math::exp(-1.0);
    if x == e_inv {
        return Ok(FuncSample {
            value: e_inv,
            residual: 0.0,
            iterations: 0,
        });
    }
    let t = entropy_term(x);
    let (lo, hi) = if x < e_inv { (e_inv, 1.0) } else { (0.0, e_inv) };
    let (value, residual, iterations) = bracketed_root(
        |y| entropy_term(y) - t,
        |y| -(math::ln(y) + 1.0),
        lo,
        hi,
    );
    if residual <= tol {
        Ok(FuncSample {
            value,
            residual,
            iterations,
        })
    } else {
        Err(CoreError::DidNotCertify {
            what: "f_tilde_eval",
            value,
            achieved: residual,
            requested: tol,
        })
    }
}

/// `f'(x) = phi'(x) / phi'(f(x))` for `x` in `[0, 1)`, with the removable
/// value `-1` at the fixed point. Diverges as `x -> 1` when `a > 1`, so
/// `x = 1` is rejected.
pub fn f_derivative(pair: ExponentPair, x: f64) -> Result<f64, CoreError> {
    if !(0.0..1.0).contains(&x) {
        return Err(CoreError::OutOfDomain {
            what: "f_derivative",
            value: x,
        });
    }
    let rho = pair.rho();
    if x == rho {
        return Ok(-1.0);
    }
    let y = f_eval(pair, x, 1e-12)?.value;
    Ok(pair.power_gap_deriv(x) / pair.power_gap_deriv(y))
}

/// First violation found by [`concavity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeViolation {
    /// A second central difference of `f_{k,k+1}` exceeded the slack.
    SecondDifference { x: f64, value: f64 },
    /// `phi(rho - sigma) >= phi(rho + sigma)` failed.
    PhiOrder { sigma: f64, lhs: f64, rhs: f64 },
    /// `psi(rho - sigma) >= psi(rho + sigma)` failed.
    PsiOrder { sigma: f64, lhs: f64, rhs: f64 },
}

impl core::fmt::Display for ShapeViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ShapeViolation::SecondDifference { x, value } => {
                write!(f, "second difference {value:.3e} > slack at x = {x}")
            }
            ShapeViolation::PhiOrder { sigma, lhs, rhs } => {
                write!(f, "phi order fails at sigma = {sigma}: {lhs} < {rhs}")
            }
            ShapeViolation::PsiOrder { sigma, lhs, rhs } => {
                write!(f, "psi order fails at sigma = {sigma}: {lhs} < {rhs}")
            }
        }
    }
}

/// Concavity evidence for `f_{k,k+1}`: every second central difference on
/// a uniform grid over `[0.01, 0.99]` must stay below `slack`, and the
/// two-sided orderings `phi(rho-sigma) >= phi(rho+sigma)` and
/// `psi(rho-sigma) >= psi(rho+sigma)` must hold for
/// `sigma in (0, 1/(k+1)]` (sampled on `grid` points). Returns the first
/// violation found, scanning left to right.
pub fn concavity_check(k: u32, grid: usize, slack: f64) -> Result<(), ShapeViolation> {
    assert!(k >= 1 && grid >= 3, "need k >= 1 and grid >= 3");
    let pair = ExponentPair::consecutive(k);
    let h = 0.98 / (grid - 1) as f64;
    let value = |i: usize| {
        let x = 0.01 + h * i as f64;
        f_eval(pair, x, 1e-11).expect("solver certifies on [0.01, 0.99]").value
    };
    let mut prev = value(0);
    let mut cur = value(1);
    for i in 1..grid - 1 {
        let next = value(i + 1);
        let d2 = next - 2.0 * cur + prev;
        if d2 > slack {
            return Err(ShapeViolation::SecondDifference {
                x: 0.01 + h * i as f64,
                value: d2,
            });
        }
        prev = cur;
        cur = next;
    }

    let rho = pair.rho();
    let sigma_max = 1.0 / (k + 1) as f64;
    // Strict interior comparisons; the roundoff allowance matters only
    // where the two sides are mathematically equal (k = 1).
    let eps = 1e-13;
    for j in 1..=grid {
        let sigma = sigma_max * j as f64 / grid as f64;
        let (lhs, rhs) = (pair.power_gap(rho - sigma), pair.power_gap(rho + sigma));
        if lhs < rhs - eps {
            return Err(ShapeViolation::PhiOrder { sigma, lhs, rhs });
        }
        let (lhs, rhs) = (pair.psi(rho - sigma), pair.psi(rho + sigma));
        if lhs < rhs - eps * (1.0 + math::abs(lhs)) {
            return Err(ShapeViolation::PsiOrder { sigma, lhs, rhs });
        }
    }
    Ok(())
}

/// Residual of the exponent-scaling covariance
/// `f_{a g, b g}(x) = f_{a,b}(x^g)^(1/g)`.
pub fn scaling_residual(
    pair: ExponentPair,
    gamma: f64,
    x: f64,
    tol: f64,
) -> Result<f64, CoreError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(CoreError::BadParameter {
            what: "scaling_residual requires gamma > 0",
        });
    }
    let scaled = ExponentPair::new(pair.a * gamma, pair.b * gamma)?;
    let lhs = f_eval(scaled, x, tol)?.value;
    let rhs = math::pow(f_eval(pair, math::pow(x, gamma), tol)?.value, 1.0 / gamma);
    Ok(math::abs(lhs - rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_closed_forms() {
        assert!((ExponentPair::new(1.0, 2.0).unwrap().rho() - 0.5).abs() < 1e-15);
        assert!((ExponentPair::new(2.0, 3.0).unwrap().rho() - 2.0 / 3.0).abs() < 1e-15);
        assert!((ExponentPair::new(3.0, 4.0).unwrap().rho() - 0.75).abs() < 1e-15);
        // exp(-ln(8.8)/3.9), computed independently at high precision.
        let rho = ExponentPair::new(0.5, 4.4).unwrap().rho();
        assert!((rho - 0.572_565_209_757_101_4).abs() < 1e-15);
    }

    #[test]
    fn peak_closed_forms() {
        for k in 1u32..=6 {
            let pair = ExponentPair::consecutive(k);
            let expect = (k as f64).powi(k as i32) / ((k + 1) as f64).powi(k as i32 + 1);
            assert!(
                (pair.peak() - expect).abs() <= 1e-15,
                "peak mismatch at k = {k}"
            );
        }
    }

    #[test]
    fn power_gap_matches_naive_form() {
        let pair = ExponentPair::new(1.3, 2.9).unwrap();
        for i in 1..40 {
            let x = i as f64 / 40.0;
            let naive = x.powf(1.3) - x.powf(2.9);
            assert!((pair.power_gap(x) - naive).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_case_is_one_minus_x() {
        // phi(y) = y - y^2 = x - x^2 factors as (y - x)(y + x - 1) = 0,
        // so the opposite-branch solution is exactly 1 - x.
        let pair = ExponentPair::new(1.0, 2.0).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let s = f_eval(pair, x, 1e-13).unwrap();
            assert!(
                (s.value - (1.0 - x)).abs() < 2e-13,
                "x = {x}: got {}",
                s.value
            );
        }
    }

    #[test]
    fn quadratic_case_against_factored_cubic() {
        // For (a,b) = (2,3) and x = 9/10 the equation y^2 - y^3 = 0.081
        // factors as (y - 0.9)(y^2 - 0.1 y - 0.09) = 0, so the branch
        // value is (0.1 + sqrt(0.37)) / 2.
        let pair = ExponentPair::new(2.0, 3.0).unwrap();
        let expect = (0.1 + 0.37f64.sqrt()) / 2.0;
        let got = f_eval(pair, 0.9, 1e-14).unwrap().value;
        assert!((got - expect).abs() < 1e-14, "got {got}, want {expect}");
    }

    #[test]
    fn endpoints_and_fixed_point() {
        for &(a, b) in &[(1.0, 2.0), (2.0, 3.0), (0.5, 4.4), (1.3, 2.9)] {
            let pair = ExponentPair::new(a, b).unwrap();
            assert_eq!(f_eval(pair, 0.0, 1e-12).unwrap().value, 1.0);
            assert_eq!(f_eval(pair, 1.0, 1e-12).unwrap().value, 0.0);
            let rho = pair.rho();
            assert_eq!(f_eval(pair, rho, 1e-12).unwrap().value, rho);
        }
    }

    #[test]
    fn involution_round_trip() {
        for &(a, b) in &[(1.0, 2.0), (2.0, 3.0), (3.0, 4.0), (0.5, 4.4), (1.3, 2.9)] {
            let pair = ExponentPair::new(a, b).unwrap();
            for i in 1..50 {
                let x = i as f64 / 50.0;
                let y = f_eval(pair, x, 1e-13).unwrap().value;
                let back = f_eval(pair, y, 1e-13).unwrap().value;
                assert!(
                    (back - x).abs() < 1e-9,
                    "round trip failed: a={a} b={b} x={x} back={back}"
                );
            }
        }
    }

    #[test]
    fn branches_are_opposite_and_decreasing() {
        let pair = ExponentPair::new(1.3, 2.9).unwrap();
        let rho = pair.rho();
        let mut last = f64::INFINITY;
        for i in 0..=60 {
            let x = i as f64 / 60.0;
            let y = f_eval(pair, x, 1e-12).unwrap().value;
            assert!(y <= last + 1e-12, "not decreasing at x = {x}");
            last = y;
            if x < rho {
                assert!(y >= rho);
            }
            if x > rho {
                assert!(y <= rho);
            }
        }
    }

    #[test]
    fn near_one_asymptote() {
        // f(y) ~ ((b-a)(1-y))^(1/a) as y -> 1; the (b-a) factor is 1 for
        // consecutive pairs.
        let eps = 1e-6;
        for k in 1u32..=4 {
            let pair = ExponentPair::consecutive(k);
            let f = f_eval(pair, 1.0 - eps, 1e-15).unwrap().value;
            let ratio = f / eps.powf(1.0 / k as f64);
            assert!((ratio - 1.0).abs() < 0.05, "k = {k}: ratio {ratio}");
        }
        let pair = ExponentPair::new(0.5, 4.4).unwrap();
        let f = f_eval(pair, 1.0 - eps, 1e-15).unwrap().value;
        let ratio = f / (3.9 * eps).powf(2.0);
        assert!((ratio - 1.0).abs() < 0.05, "general pair ratio {ratio}");
    }

    #[test]
    fn tilde_fixed_point_and_oracle() {
        let e_inv = (-1.0f64).exp();
        assert_eq!(f_tilde_eval(e_inv, 1e-13).unwrap().value, e_inv);
        assert_eq!(f_tilde_eval(0.0, 1e-13).unwrap().value, 1.0);
        assert_eq!(f_tilde_eval(1.0, 1e-13).unwrap().value, 0.0);

        // Plain interval-halving oracle on the decreasing branch.
        let oracle = |x: f64| {
            let t = -x * x.ln();
            let (mut lo, mut hi) = if x < e_inv { (e_inv, 1.0) } else { (0.0, e_inv) };
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let g = if mid > 0.0 { -mid * mid.ln() } else { 0.0 };
                // Entropy rises on [0, 1/e] and falls on [1/e, 1].
                let rising = hi <= e_inv;
                if (g > t) == rising {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        for &x in &[0.05, 0.1, 0.2, 0.5, 0.8, 0.95] {
            let got = f_tilde_eval(x, 1e-14).unwrap().value;
            let want = oracle(x);
            assert!((got - want).abs() < 1e-11, "x = {x}: {got} vs {want}");
        }
        // Involution property.
        for &x in &[0.1, 0.3, 0.6, 0.9] {
            let y = f_tilde_eval(x, 1e-14).unwrap().value;
            let back = f_tilde_eval(y, 1e-14).unwrap().value;
            assert!((back - x).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_formula_and_special_values() {
        let pair = ExponentPair::new(1.0, 2.0).unwrap();
        for &x in &[0.1, 0.4, 0.7] {
            assert!((f_derivative(pair, x).unwrap() + 1.0).abs() < 1e-10);
        }
        let pair = ExponentPair::new(2.0, 3.0).unwrap();
        assert_eq!(f_derivative(pair, pair.rho()).unwrap(), -1.0);
        // Central-difference oracle away from the fixed point.
        for &x in &[0.2, 0.5, 0.8, 0.9] {
            let h = 1e-6;
            let up = f_eval(pair, x + h, 1e-15).unwrap().value;
            let dn = f_eval(pair, x - h, 1e-15).unwrap().value;
            let numeric = (up - dn) / (2.0 * h);
            let formula = f_derivative(pair, x).unwrap();
            assert!(
                (numeric - formula).abs() < 1e-7 * (1.0 + formula.abs()),
                "x = {x}: {numeric} vs {formula}"
            );
        }
        assert!(f_derivative(pair, 1.0).is_err());
    }

    #[test]
    fn derivative_at_fixed_point_is_limit() {
        // Continuity of f' at rho: formula values approach -1.
        for k in 1u32..=4 {
            let pair = ExponentPair::consecutive(k);
            let rho = pair.rho();
            let d = f_derivative(pair, rho - 1e-5).unwrap();
            assert!((d + 1.0).abs() < 1e-3, "k = {k}: {d}");
        }
    }

    #[test]
    fn concavity_of_consecutive_pairs() {
        for k in 1u32..=6 {
            concavity_check(k, 800, 1e-8).unwrap_or_else(|v| panic!("k = {k}: {v}"));
        }
    }

    #[test]
    fn scaling_covariance() {
        let pair = ExponentPair::new(1.0, 2.0).unwrap();
        for &gamma in &[0.5, 2.0, 3.7] {
            for &x in &[0.1, 0.5, 0.9] {
                let r = scaling_residual(pair, gamma, x, 1e-13).unwrap();
                assert!(r < 1e-10, "gamma = {gamma}, x = {x}: residual {r}");
            }
        }
        // (2,3) scaled by 1/2 gives the fractional pair (1, 1.5).
        let pair = ExponentPair::new(2.0, 3.0).unwrap();
        let r = scaling_residual(pair, 0.5, 0.3, 1e-13).unwrap();
        assert!(r < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExponentPair::new(2.0, 2.0).is_err());
        assert!(ExponentPair::new(-1.0, 2.0).is_err());
        assert!(ExponentPair::new(0.0, 1.0).is_err());
        let pair = ExponentPair::new(1.0, 2.0).unwrap();
        assert!(f_eval(pair, -0.1, 1e-12).is_err());
        assert!(f_eval(pair, 1.1, 1e-12).is_err());
        assert!(f_tilde_eval(2.0, 1e-12).is_err());
    }

    #[test]
    fn residuals_certify_requested_tolerance() {
        let pair = ExponentPair::new(1.3, 2.9).unwrap();
        for i in 1..200 {
            let x = i as f64 / 200.0;
            let s = f_eval(pair, x, 1e-12).unwrap();
            assert!(s.residual <= 1e-12);
            assert!(s.iterations <= MAX_SOLVER_ITERS);
        }
    }
}
