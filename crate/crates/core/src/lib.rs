//! Bilevel day-ahead electricity market simulator.
//!
//! The lower level is a set of GENCO bidding agents trained with independent
//! deep Q-learning, backed either by a classical feed-forward network or by a
//! simulated six-qubit variational quantum circuit. The upper level is a PPO
//! actor-critic that tunes the market mechanism (price cap, settlement rule,
//! renewable deviation penalty) from monthly market indicators. Everything is
//! deterministic under a single master seed.

pub mod checkpoint;
pub mod config;
pub mod dqn;
pub mod error;
pub mod market;
pub mod mlp;
pub mod nn;
pub mod orchestrator;
pub mod ppo;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod vqc;

pub use error::{Error, Result};
