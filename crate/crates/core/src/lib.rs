//! Reward labeling for offline RL from expert demonstrations.
//!
//! Trajectories are compared state by state against a demonstration. The
//! crate provides entropic optimal transport (plain and temporally masked)
//! and the cheaper proximity rewards (Min-Dist, Seg-match, Seg-window and a
//! unified window form), plus squashing, rescaling, dataset I/O, an
//! evaluation harness and a CLI.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod harness;
pub mod label;
pub mod ot;
pub mod postprocess;
pub mod proximity;
pub mod reward;
pub mod traj;

pub use error::{Error, Result};
pub use exec::Execution;
