//! Fog-RAN computation offloading and resource allocation with federated
//! deep reinforcement learning.
//!
//! - [`env`]: the F-RAN system model as an episodic per-F-AP environment.
//! - [`baselines`]: local / equal-share policies and the exact per-slot optimum.
//! - [`ddpg`], [`dqn`]: the learning agents, sharing [`replay`].
//! - [`fed`]: synchronous federated averaging across F-AP agents.
//! - [`harness`]: experiment configs, sweeps and CSV metrics.

pub mod agent;
pub mod baselines;
pub mod ddpg;
pub mod dqn;
pub mod env;
pub mod error;
pub mod fed;
pub mod harness;
pub mod replay;
pub mod seed;

pub use error::{Error, Result};
