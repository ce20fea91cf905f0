//! Actor-critic training guided by an ensemble of suboptimal teachers.
//!
//! The crate bundles everything needed to run the Path Following benchmark:
//! a small network engine, the environments, teacher policies, the Bayesian
//! critic, the teacher-guided behavioral policy, the training loop with its
//! baselines, and an exact analyzer of teacher attributes on tabular MDPs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attributes;
pub mod baselines;
pub mod behavior;
pub mod critic;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod teachers;
pub mod training;

pub use error::{Error, Result};

/// Random stream type used throughout; seeded per named stream by
/// [`harness::seeds::SeedStreams`].
pub type StreamRng = rand_xoshiro::Xoshiro256PlusPlus;
