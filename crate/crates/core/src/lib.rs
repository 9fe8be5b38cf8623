//! Deterministic microscopic simulation of a two-entry roundabout with
//! IDM-driven human traffic and two learnable autonomous vehicles, wrapped as
//! a finite-horizon RL environment with Gaussian and adversarial perturbation
//! channels, a PPO trainer and an evaluation harness.

pub mod error;
pub mod harness;
pub mod env;
pub mod perturbation;
pub mod policy;
pub mod traffic;
pub mod trainer;

pub use error::{Error, Result};
