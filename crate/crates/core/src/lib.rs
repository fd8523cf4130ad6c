//! Ranking of lenders listed on a loan aggregator from their post-click
//! conversion logs.
//!
//! The pipeline runs in four stages, one module each:
//!
//! * [`data`] parses the conversion, product and click logs and derives
//!   per-application timelines;
//! * [`features`] turns the logs into five comparable per-lender features;
//! * [`rank`] compares lenders pairwise and ranks them by the stationary
//!   distribution of the induced Markov chain;
//! * [`eval`] replays historical traffic against a candidate ranking and
//!   provides the two-sample tests used to read A/B results.

pub mod data;
pub mod features;
pub mod rank;
pub mod eval;
