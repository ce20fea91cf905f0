//! Environments: the continuous Path Following task and finite tabular MDPs.

pub mod path;
pub mod tabular;

pub use path::{Action, EnvStep, Observation, PathFollowing, PathFollowingState};
pub use tabular::{Dynamics, TabularMdp, TabularPolicy};
