//! Online learning of n-qubit quantum states.
//!
//! The crate simulates the two-outcome-measurement online learning game:
//! regularized-follow-the-leader and matrix-multiplicative-weights learners
//! with their provable regret bounds, the mistake-bounded realizable-case
//! wrapper, a postselection-based learner over amplified hypotheses, and
//! verifiers for random-access-code information bounds. `harness` drives
//! end-to-end experiments and backs the `qonline` CLI.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod learn;
pub mod loss;
pub mod postsel;
pub mod qmodel;
pub mod spectra;

pub mod cli;

pub use error::{Error, Result};
