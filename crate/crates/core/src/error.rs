//! Error type shared by the solvers and checks in this crate.

use core::fmt;

/// Why a computation could not produce a certified result.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A parameter was outside its documented domain.
    BadParameter {
        what: &'static str,
    },
    /// An input point was outside the interval the operation is defined on.
    OutOfDomain {
        what: &'static str,
        value: f64,
    },
    /// An iterative method hit its iteration cap before certifying its
    /// tolerance. Carries the best value reached and the bound that was
    /// actually achieved.
    DidNotCertify {
        what: &'static str,
        value: f64,
        achieved: f64,
        requested: f64,
    },
    /// A two-sided bound was requested where its applicability condition
    /// fails (for example a block length shorter than the gap length).
    NotApplicable {
        what: &'static str,
    },
    /// A structural invariant the algorithm relies on was violated at
    /// runtime (for example closure escaping its bounding rectangle under a
    /// nonstandard threshold).
    InvariantViolated {
        what: &'static str,
    },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::BadParameter { what } => write!(f, "bad parameter: {what}"),
            CoreError::OutOfDomain { what, value } => {
                write!(f, "{what}: input {value} out of domain")
            }
            CoreError::DidNotCertify {
                what,
                value,
                achieved,
                requested,
            } => write!(
                f,
                "{what}: reached {value} but certified only {achieved:.3e} of requested {requested:.3e}"
            ),
            CoreError::NotApplicable { what } => write!(f, "not applicable: {what}"),
            CoreError::InvariantViolated { what } => write!(f, "invariant violated: {what}"),
        }
    }
}

impl core::error::Error for CoreError {}
