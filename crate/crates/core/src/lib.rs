//! Incremental autonomous exploration in tabular MDPs with a RESET action.
//!
//! The crate provides exact oracles on known MDPs ([`oracle`]), an SSP value-iteration
//! solver ([`ssp`]), optimistic model construction from visit counts ([`optimistic`]),
//! the [`disco`] and [`ucb`] exploration algorithms, and benchmark environments ([`envs`]).

pub mod disco;
pub mod env;
pub mod envs;
pub mod error;
pub mod format;
pub mod mdp;
pub mod optimistic;
pub mod oracle;
pub mod result;
pub mod ssp;
pub mod ucb;

pub use error::{Error, Result};
pub use mdp::{AlgoParams, DeterministicPolicy, HittingValues, Mode, TabularMdp};
pub use result::{ExplorationResult, GoalPolicy, StopReason};
