//! Trust-aware resource allocation on community networks.
//!
//! The crate bundles the ground-truth institutional-trust dynamics, the
//! organization reward, three training environments that differ in how much
//! of the trust state the allocating agent can see, a small DDPG learner, and
//! the sweep harness that trains and evaluates policies over a grid of
//! organization preferences and initial trust priors.

pub mod cli;
pub mod ddpg;
pub mod envs;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod plot;
pub mod policy;
pub mod reward;
pub mod seed;
pub mod trust;

pub use error::{Error, Result};
