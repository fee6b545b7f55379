//! Command-line front end for the involution toolkit: single-shot
//! computations, seeded simulations, and the full verification suite.

pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

pub use config::{RunConfig, DEFAULT_SEED};
pub use report::VerificationReport;
