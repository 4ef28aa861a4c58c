//! Exact-arithmetic workbench for single-item auctions run by profit
//! maximizers over discrete value grids: morality and truthfulness checks,
//! expected revenue, exhaustive revenue optimization, closed-form optimal
//! truthful auctions, the price-lifting procedure and correlated-value tools.

pub mod catalog;
pub mod cli;
pub mod correlated;
pub mod distributions;
pub mod error;
pub mod io;
pub mod mechanism;
pub mod myerson;
pub mod rational;
pub mod reproduce;
pub mod sampling;
pub mod search;

pub use error::{Error, Result};
pub use rational::Rational;

use serde::Serialize;

/// Outcome of a predicate check, with a witness on failure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "witness", rename_all = "snake_case")]
pub enum Check<W> {
    Holds,
    Fails(W),
}

impl<W> Check<W> {
    pub fn holds(&self) -> bool {
        matches!(self, Check::Holds)
    }

    pub fn witness(&self) -> Option<&W> {
        match self {
            Check::Holds => None,
            Check::Fails(w) => Some(w),
        }
    }
}
