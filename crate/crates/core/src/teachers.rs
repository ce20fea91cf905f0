//! Hand-written Path Following teachers and the named teacher sets.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::envs::path::{clip_action, Action, PathFollowingState, CORNERS, MAX_STEP};
use crate::error::{Error, Result};

/// Default per-axis Gaussian noise added to noisy teachers.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeacherKind {
    /// Heads to one fixed corner.
    Corner(usize),
    /// Heads to the current goal.
    Sufficient,
    /// Moves away from the current goal.
    Adversarial,
    /// Heads to the midpoint of the previous and current goal.
    Midpoint,
    /// Heads to whichever of the previous and current goal is closer.
    Endpoint,
    /// Uniform random action.
    Random,
}

impl fmt::Display for TeacherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TeacherKind::Corner(i) => write!(f, "corner_{i}"),
            TeacherKind::Sufficient => f.write_str("sufficient"),
            TeacherKind::Adversarial => f.write_str("adversarial"),
            TeacherKind::Midpoint => f.write_str("midpoint"),
            TeacherKind::Endpoint => f.write_str("endpoint"),
            TeacherKind::Random => f.write_str("random"),
        }
    }
}

/// Largest step toward `target` that respects the per-axis bound, keeping
/// the heading. Zero when already there.
pub fn step_toward(position: [f64; 2], target: [f64; 2]) -> Action {
    let d = [target[0] - position[0], target[1] - position[1]];
    let norm = d[0].abs().max(d[1].abs());
    if norm == 0.0 {
        return [0.0, 0.0];
    }
    let scale = (MAX_STEP / norm).min(1.0);
    clip_action([d[0] * scale, d[1] * scale])
}

pub fn corner_action(corner: usize, state: &PathFollowingState) -> Action {
    step_toward(state.position, CORNERS[corner])
}

pub fn sufficient_action(state: &PathFollowingState) -> Action {
    corner_action(state.goal_order[state.goal_index.min(3)], state)
}

pub fn adversarial_action(state: &PathFollowingState) -> Action {
    let a = sufficient_action(state);
    clip_action([-a[0], -a[1]])
}

pub fn midpoint_action(state: &PathFollowingState) -> Action {
    let p = state.previous_goal();
    let c = state.current_goal();
    step_toward(state.position, [(p[0] + c[0]) / 2.0, (p[1] + c[1]) / 2.0])
}

pub fn endpoint_action(state: &PathFollowingState) -> Action {
    let p = state.previous_goal();
    let c = state.current_goal();
    let d = |g: [f64; 2]| (g[0] - state.position[0]).powi(2) + (g[1] - state.position[1]).powi(2);
    let target = if d(p) < d(c) { p } else { c };
    step_toward(state.position, target)
}

pub fn random_action<R: Rng + ?Sized>(rng: &mut R) -> Action {
    [
        rng.random_range(-MAX_STEP..=MAX_STEP),
        rng.random_range(-MAX_STEP..=MAX_STEP),
    ]
}

/// A teacher with optional Gaussian perturbation of its actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Teacher {
    pub kind: TeacherKind,
    pub noise_sigma: f64,
}

impl Teacher {
    pub fn new(kind: TeacherKind) -> Self {
        Teacher {
            kind,
            noise_sigma: 0.0,
        }
    }

    pub fn noisy(kind: TeacherKind, sigma: f64) -> Self {
        Teacher {
            kind,
            noise_sigma: sigma,
        }
    }

    /// Noise-free action. Only the random teacher reads `rng`.
    pub fn base_action<R: Rng + ?Sized>(&self, state: &PathFollowingState, rng: &mut R) -> Action {
        match self.kind {
            TeacherKind::Corner(i) => corner_action(i, state),
            TeacherKind::Sufficient => sufficient_action(state),
            TeacherKind::Adversarial => adversarial_action(state),
            TeacherKind::Midpoint => midpoint_action(state),
            TeacherKind::Endpoint => endpoint_action(state),
            TeacherKind::Random => random_action(rng),
        }
    }

    /// Action with the teacher's noise applied, clipped to the action box.
    pub fn action<R: Rng + ?Sized>(&self, state: &PathFollowingState, rng: &mut R) -> Action {
        let a = self.base_action(state, rng);
        add_noise(a, self.noise_sigma, rng)
    }
}

/// `action + N(0, sigma²)` per axis, clipped. No draws when `sigma == 0`.
pub fn add_noise<R: Rng + ?Sized>(action: Action, sigma: f64, rng: &mut R) -> Action {
    if sigma <= 0.0 {
        return clip_action(action);
    }
    let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
    clip_action([
        action[0] + normal.sample(rng),
        action[1] + normal.sample(rng),
    ])
}

/// Named, ordered collection of teachers.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherSet {
    pub name: String,
    pub teachers: Vec<Teacher>,
}

impl TeacherSet {
    pub const NAMES: &'static [&'static str] = &[
        "none",
        "set_A",
        "set_B",
        "set_C",
        "set_D",
        "set_E",
        "set_F",
        "set_G",
        "set_H",
        "single_sufficient",
        "single_sufficient_noisy",
        "four_partial",
        "four_partial_noisy",
        "insufficient_one_corner",
    ];

    /// Build a set by name; `sigma` is the noise used by the noisy members.
    pub fn by_name(name: &str, sigma: f64) -> Result<Self> {
        use TeacherKind::*;
        let noisy_corners = |n: usize| {
            (0..n)
                .map(|i| Teacher::noisy(Corner(i), sigma))
                .collect::<Vec<_>>()
        };
        let with_random = |k: usize| {
            let mut t = noisy_corners(4);
            t.extend((0..k).map(|_| Teacher::new(Random)));
            t
        };
        let teachers = match name {
            "none" => Vec::new(),
            "set_A" => noisy_corners(3),
            "set_B" => noisy_corners(2),
            "set_C" | "insufficient_one_corner" => noisy_corners(1),
            "set_D" => vec![Teacher::new(Midpoint), Teacher::new(Endpoint)],
            "set_E" => with_random(1),
            "set_F" => with_random(2),
            "set_G" => with_random(4),
            "set_H" => vec![Teacher::noisy(Sufficient, sigma), Teacher::new(Adversarial)],
            "single_sufficient" => vec![Teacher::new(Sufficient)],
            "single_sufficient_noisy" => vec![Teacher::noisy(Sufficient, sigma)],
            "four_partial" => (0..4).map(|i| Teacher::new(Corner(i))).collect(),
            "four_partial_noisy" => noisy_corners(4),
            other => {
                return Err(Error::InvalidValue {
                    key: "teachers".into(),
                    value: other.into(),
                    reason: format!("expected one of {}", Self::NAMES.join(", ")),
                })
            }
        };
        Ok(TeacherSet {
            name: name.to_string(),
            teachers,
        })
    }

    pub fn len(&self) -> usize {
        self.teachers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.teachers.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::path::{distance, step_state};
    use crate::StreamRng;
    use rand::SeedableRng;

    fn at(position: [f64; 2], order: [usize; 4]) -> PathFollowingState {
        let mut s = PathFollowingState::start(order);
        s.position = position;
        s
    }

    #[test]
    fn corner_examples() {
        let s = at([0.0, 0.0], [0, 1, 2, 3]);
        assert_eq!(corner_action(3, &s), [0.045, 0.045]);
        let s = at([0.24, 0.25], [0, 1, 2, 3]);
        let a = corner_action(3, &s);
        assert!((a[0] - 0.01).abs() < 1e-15 && a[1] == 0.0);
        let s = at(CORNERS[2], [0, 1, 2, 3]);
        assert_eq!(corner_action(2, &s), [0.0, 0.0]);
    }

    #[test]
    fn corner_converges_within_six_steps() {
        for c in 0..4 {
            let mut s = PathFollowingState::start([0, 1, 2, 3]);
            let mut reached = None;
            for t in 1..=6 {
                let a = corner_action(c, &s);
                step_state(&mut s, a).unwrap();
                if distance(s.position, CORNERS[c]) <= 0.05 {
                    reached = Some(t);
                    break;
                }
            }
            assert!(reached.is_some(), "corner {c}");
        }
    }

    #[test]
    fn adversarial_negates_diagonal() {
        let s = at([0.0, 0.0], [3, 0, 1, 2]);
        assert_eq!(adversarial_action(&s), [-0.045, -0.045]);
    }

    #[test]
    fn midpoint_and_endpoint() {
        let mut s = at([0.0, 0.0], [3, 0, 1, 2]);
        s.goal_index = 1;
        s.position = [0.0, 0.0];
        assert_eq!(midpoint_action(&s), [0.0, 0.0]);
        s.position = [-0.2, -0.2];
        let a = endpoint_action(&s);
        assert!(a[0] < 0.0 && a[1] < 0.0);
    }

    #[test]
    fn set_cardinalities() {
        let sizes = [
            ("set_A", 3),
            ("set_B", 2),
            ("set_C", 1),
            ("set_D", 2),
            ("set_E", 5),
            ("set_F", 6),
            ("set_G", 8),
            ("set_H", 2),
        ];
        for (name, n) in sizes {
            assert_eq!(TeacherSet::by_name(name, 0.3).unwrap().len(), n, "{name}");
        }
        assert!(TeacherSet::by_name("set_Z", 0.3).is_err());
    }

    #[test]
    fn zero_sigma_is_identity_and_draws_nothing() {
        let s = at([0.1, -0.03], [0, 1, 2, 3]);
        let mut rng = StreamRng::seed_from_u64(1);
        let before = rng.clone();
        let t = Teacher::noisy(TeacherKind::Corner(1), 0.0);
        assert_eq!(t.action(&s, &mut rng), corner_action(1, &s));
        assert_eq!(rng, before);
    }
}
