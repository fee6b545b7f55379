//! Computational companion to a family of interval involutions and the
//! discrete structures they control.
//!
//! The central object is the decreasing solution `f = f_{a,b}` of
//!
//! ```text
//! f(x)^a - f(x)^b = x^a - x^b,        0 <= x <= 1,  0 < a < b,
//! ```
//!
//! an involution of `[0,1]` exchanging the two monotone branches of
//! `x^a - x^b` around its maximum at `rho = exp(-(log b - log a)/(b - a))`.
//! Everything else here is built on top of it:
//!
//! * [`involution`]: the solver for `f`, its entropy-equation analogue,
//!   derivatives, and shape checks.
//! * [`series`]: the hypergeometric-style series that agrees with
//!   `-log f` below the fixed point, and the exact rational coefficient
//!   identity behind its logarithmic form.
//! * [`quadrature`]: adaptive integration of `-log f(x)/x` and friends,
//!   whose values are `pi^2` rationals.
//! * [`gap`]: probabilities that a sequence of independent events never
//!   leaves `k` consecutive gaps, with two-sided bounds expressed through
//!   `f_{k,k+1}` and the decay constant `pi^2/(3k(k+1))`.
//! * [`partitions`]: integer partitions avoiding `k` consecutive part
//!   values, their generating-function consistency with the gap process,
//!   and classical product identities.
//! * [`automaton`]: a two-dimensional threshold growth model with
//!   long-range cross neighborhoods, its rectangle-based spanning
//!   algorithm, and Monte Carlo estimates of internal spanning.
//!
//! The crate is `no_std` (with `alloc`); all floating-point math goes
//! through [`libm`] so results do not depend on the host's libm.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod automaton;
pub mod error;
pub mod gap;
pub mod involution;
pub mod partitions;
pub mod quadrature;
pub mod series;

mod math;

pub use automaton::{Grid, ModelParams, Rectangle, Variant};
pub use error::CoreError;
pub use involution::ExponentPair;
pub use quadrature::{DualIntegral, IntegralResult, SplitIntegrals};
