//! Simulation and verification toolkit for inferring the reward function of
//! a learning agent from nothing but its stream of states and actions.
//!
//! The crate has three layers. [`env`] and [`learners`] simulate the agent:
//! bandit or MDP environments and learner models that are either provably
//! no-regret or Boltzmann-rational with a shrinking estimation error.
//! [`predictors`] and [`measures`] watch the interaction: reward predictors
//! that see only behavior, and the loss measures that score them against
//! the hidden truth. [`bounds`] and [`harness`] certify the theory: every
//! guarantee (recovery bounds, concentration events, loss transfers) and
//! every hardness result (the adversarial reward pair) is evaluated against
//! measured runs by the verification suites in [`harness::verify`].

#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod env;
pub mod harness;
pub mod learners;
pub mod measures;
pub mod predictors;
