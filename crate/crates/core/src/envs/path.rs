//! Point agent that must visit the four corners of a square in a random order.
//!
//! Observation layout: `[x, y, goal_x, goal_y, goals_left]`. Actions are
//! per-axis displacements clipped to `±MAX_STEP`. A corner pays reward 1 the
//! step the agent first comes within `GOAL_RADIUS` of it while it is the
//! current goal. Episodes always last `HORIZON` steps.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

pub const CORNERS: [[f64; 2]; 4] = [[-0.25, -0.25], [-0.25, 0.25], [0.25, -0.25], [0.25, 0.25]];
pub const MAX_STEP: f64 = 0.045;
pub const GOAL_RADIUS: f64 = 0.05;
pub const HORIZON: usize = 200;
pub const OBS_DIM: usize = 5;
pub const ACTION_DIM: usize = 2;

pub type Observation = [f64; OBS_DIM];
pub type Action = [f64; ACTION_DIM];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

/// Full simulator state. Teachers read it directly (they are privileged
/// hand-written controllers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathFollowingState {
    pub position: [f64; 2],
    /// Corner indices in visiting order.
    pub goal_order: [usize; 4],
    /// Number of corners already visited, in `0..=4`.
    pub goal_index: usize,
    pub step_index: usize,
}

impl PathFollowingState {
    pub fn start(goal_order: [usize; 4]) -> Self {
        PathFollowingState {
            position: [0.0, 0.0],
            goal_order,
            goal_index: 0,
            step_index: 0,
        }
    }

    /// Corner the agent is heading to; after the last visit this stays on the
    /// final corner.
    pub fn current_goal(&self) -> [f64; 2] {
        CORNERS[self.goal_order[self.goal_index.min(3)]]
    }

    /// Previously visited corner, or the origin before the first visit. Once
    /// every corner is visited this is the third corner in the order.
    pub fn previous_goal(&self) -> [f64; 2] {
        match self.goal_index.min(3) {
            0 => [0.0, 0.0],
            i => CORNERS[self.goal_order[i - 1]],
        }
    }

    pub fn goals_left(&self) -> usize {
        4 - self.goal_index
    }

    pub fn observation(&self) -> Observation {
        let g = self.current_goal();
        [
            self.position[0],
            self.position[1],
            g[0],
            g[1],
            self.goals_left() as f64,
        ]
    }

    pub fn is_done(&self) -> bool {
        self.step_index >= HORIZON
    }
}

pub fn clip_action(action: Action) -> Action {
    [
        action[0].clamp(-MAX_STEP, MAX_STEP),
        action[1].clamp(-MAX_STEP, MAX_STEP),
    ]
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Path Following environment owning its random stream.
#[derive(Debug, Clone)]
pub struct PathFollowing<R> {
    state: PathFollowingState,
    rng: R,
}

impl<R: Rng> PathFollowing<R> {
    /// Create the environment and start the first episode.
    pub fn new(rng: R) -> Self {
        let mut env = PathFollowing {
            state: PathFollowingState::start([0, 1, 2, 3]),
            rng,
        };
        env.reset();
        env
    }

    pub fn reset(&mut self) -> Observation {
        let mut order = [0, 1, 2, 3];
        order.shuffle(&mut self.rng);
        self.state = PathFollowingState::start(order);
        self.state.observation()
    }

    pub fn state(&self) -> &PathFollowingState {
        &self.state
    }

    pub fn step(&mut self, action: Action) -> Result<EnvStep> {
        step_state(&mut self.state, action)
    }
}

/// Advance a state in place. Deterministic.
pub fn step_state(state: &mut PathFollowingState, action: Action) -> Result<EnvStep> {
    if state.is_done() {
        return Err(Error::EpisodeFinished);
    }
    let a = clip_action(action);
    state.position[0] += a[0];
    state.position[1] += a[1];
    state.step_index += 1;
    let mut reward = 0.0;
    if state.goal_index < 4 && distance(state.position, state.current_goal()) <= GOAL_RADIUS {
        reward = 1.0;
        state.goal_index += 1;
    }
    Ok(EnvStep {
        observation: state.observation(),
        reward,
        done: state.is_done(),
    })
}
