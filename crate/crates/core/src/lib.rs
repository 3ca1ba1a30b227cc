//! Local times of killed and reflected integer random walks.
//!
//! Exact computations live in [`ladder`] (ladder-height laws, renewal
//! functions) and [`green`] (Green functions, hitting and escape
//! probabilities). [`sim`] samples local-time fields, [`limit`] holds the
//! limit laws they converge to, [`knight`] the branching description of
//! up-crossings and [`stats`] the tests that compare them.
//! [`experiment`] wires everything into named, seeded, reproducible runs.
//!
//! The guide in `book/` walks through each module; its snippets run as
//! doctests of this crate.

pub mod error;
pub mod experiment;
pub mod green;
pub mod knight;
pub mod ladder;
pub mod limit;
pub mod numeric;
pub mod parallel;
pub mod sim;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/increment-laws.md")]
    mod increment_laws {}
    #[doc = include_str!("../../../book/src/ladder-heights.md")]
    mod ladder_heights {}
    #[doc = include_str!("../../../book/src/green-functions.md")]
    mod green_functions {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/limit-laws.md")]
    mod limit_laws {}
    #[doc = include_str!("../../../book/src/branching.md")]
    mod branching {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
