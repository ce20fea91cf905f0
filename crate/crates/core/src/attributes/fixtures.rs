//! Ready-made tabular MDPs: random instances, small hand-built cases with
//! known attributes, and a discretised Path Following grid.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::envs::path::CORNERS;
use crate::envs::tabular::{Dynamics, TabularMdp, TabularPolicy};

/// Random deterministic MDP with `S ≤ max_states`, `A ≤ max_actions` and a
/// random deterministic policy.
pub fn random_deterministic<R: Rng + ?Sized>(
    rng: &mut R,
    max_states: usize,
    max_actions: usize,
) -> (TabularMdp, TabularPolicy) {
    let (s, a, gamma, goals, rho0) = random_shape(rng, max_states, max_actions);
    let mut next = Vec::with_capacity(s * a);
    for st in 0..s {
        for _ in 0..a {
            next.push(if goals.contains(&st) {
                st
            } else {
                rng.random_range(0..s)
            });
        }
    }
    let mdp = TabularMdp::new(s, a, gamma, &goals, rho0, Dynamics::Deterministic(next))
        .expect("valid by construction");
    let policy = TabularPolicy::Deterministic((0..s).map(|_| rng.random_range(0..a)).collect());
    (mdp, policy)
}

/// Random stochastic MDP (rows with up to three successors) and a random
/// stochastic policy.
pub fn random_stochastic<R: Rng + ?Sized>(
    rng: &mut R,
    max_states: usize,
    max_actions: usize,
) -> (TabularMdp, TabularPolicy) {
    let (s, a, gamma, goals, rho0) = random_shape(rng, max_states, max_actions);
    let mut rows = Vec::with_capacity(s * a);
    for st in 0..s {
        for _ in 0..a {
            if goals.contains(&st) {
                rows.push(vec![(st, 1.0)]);
                continue;
            }
            let k = rng.random_range(1..=3.min(s));
            let mut targets: Vec<usize> = (0..s).collect();
            targets.shuffle(rng);
            targets.truncate(k);
            rows.push(targets.into_iter().zip(random_simplex(rng, k)).collect());
        }
    }
    let mdp = TabularMdp::new(s, a, gamma, &goals, rho0, Dynamics::Stochastic(rows))
        .expect("valid by construction");
    let policy = TabularPolicy::Stochastic((0..s).map(|_| random_simplex(rng, a)).collect());
    (mdp, policy)
}

type Shape = (usize, usize, f64, Vec<usize>, Vec<f64>);

fn random_shape<R: Rng + ?Sized>(rng: &mut R, max_states: usize, max_actions: usize) -> Shape {
    let s = rng.random_range(1..=max_states.max(1));
    let a = rng.random_range(1..=max_actions.max(1));
    let gamma = rng.random_range(0.5..0.99);
    let n_goals = rng.random_range(1..=(s / 3).max(1));
    let mut states: Vec<usize> = (0..s).collect();
    states.shuffle(rng);
    let goals = states[..n_goals].to_vec();
    let mut rho0 = vec![0.0; s];
    rho0[rng.random_range(0..s)] = 1.0;
    (s, a, gamma, goals, rho0)
}

/// `k` non-negative weights summing to 1 (the last absorbs rounding).
fn random_simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = p[..k - 1].iter().sum();
    p[k - 1] = 1.0 - head;
    p
}

/// Deterministic line `0 → 1 → … → n−1` with action 0 = right and
/// action 1 = stay; the last state is the goal, start at 0.
pub fn line(n: usize, gamma: f64) -> TabularMdp {
    let mut next = Vec::with_capacity(2 * n);
    for s in 0..n {
        let right = if s + 1 < n { s + 1 } else { s };
        next.push(right);
        next.push(s);
    }
    let mut rho0 = vec![0.0; n];
    rho0[0] = 1.0;
    TabularMdp::new(n, 2, gamma, &[n - 1], rho0, Dynamics::Deterministic(next)).expect("valid line")
}

/// Teacher that helps only in the first two states of a 4-state line and
/// stalls before the goal: partial but insufficient.
pub fn partial_only() -> (TabularMdp, TabularPolicy) {
    (line(4, 0.9), TabularPolicy::Deterministic(vec![0, 0, 1, 0]))
}

/// Two teachers on a 4-state line, each stalling where the other moves:
/// individually insufficient, jointly sufficient.
pub fn alternating_pair() -> (TabularMdp, TabularPolicy, TabularPolicy) {
    (
        line(4, 0.9),
        TabularPolicy::Deterministic(vec![0, 1, 0, 0]),
        TabularPolicy::Deterministic(vec![1, 0, 1, 0]),
    )
}

/// Line `0 … n−1` with goals at both ends; action 0 = left, 1 = right.
/// The two teachers head to opposite ends and contradict each other.
pub fn opposing_pair(n: usize) -> (TabularMdp, TabularPolicy, TabularPolicy) {
    let mut next = Vec::with_capacity(2 * n);
    for s in 0..n {
        if s == 0 || s == n - 1 {
            next.extend([s, s]);
        } else {
            next.extend([s - 1, s + 1]);
        }
    }
    let mut rho0 = vec![0.0; n];
    rho0[n / 2] = 1.0;
    let mdp = TabularMdp::new(n, 2, 0.9, &[0, n - 1], rho0, Dynamics::Deterministic(next))
        .expect("valid");
    (
        mdp,
        TabularPolicy::Deterministic(vec![0; n]),
        TabularPolicy::Deterministic(vec![1; n]),
    )
}

/// Line with actions 0 = right, 1 = left (clamped at 0); returns the forward
/// teacher and an adversary that always walks away from the goal.
pub fn adversarial_pair(n: usize) -> (TabularMdp, TabularPolicy, TabularPolicy) {
    let mut next = Vec::with_capacity(2 * n);
    for s in 0..n {
        if s == n - 1 {
            next.extend([s, s]);
        } else {
            next.extend([s + 1, s.saturating_sub(1)]);
        }
    }
    let mut rho0 = vec![0.0; n];
    rho0[0] = 1.0;
    let mdp =
        TabularMdp::new(n, 2, 0.9, &[n - 1], rho0, Dynamics::Deterministic(next)).expect("valid");
    (
        mdp,
        TabularPolicy::Deterministic(vec![0; n]),
        TabularPolicy::Deterministic(vec![1; n]),
    )
}

pub const GRID: usize = 21;
pub const GRID_CELLS: usize = GRID * GRID;
const GRID_SPACING: f64 = 1.0 / (GRID as f64 - 1.0);

/// Grid moves: stay, +x, −x, +y, −y.
pub const GRID_MOVES: [(i64, i64); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];

pub fn cell_index(i: usize, j: usize) -> usize {
    i * GRID + j
}

pub fn cell_coords(cell: usize) -> (usize, usize) {
    (cell / GRID, cell % GRID)
}

/// Cell containing a point of `[−0.5, 0.5]²`.
pub fn cell_of(p: [f64; 2]) -> usize {
    let to =
        |x: f64| (((x + 0.5) / GRID_SPACING).round() as i64).clamp(0, GRID as i64 - 1) as usize;
    cell_index(to(p[0]), to(p[1]))
}

pub fn corner_cell(corner: usize) -> usize {
    cell_of(CORNERS[corner])
}

fn apply_move(cell: usize, action: usize) -> usize {
    let (i, j) = cell_coords(cell);
    let (dx, dy) = GRID_MOVES[action];
    let clamp = |v: i64| v.clamp(0, GRID as i64 - 1) as usize;
    cell_index(clamp(i as i64 + dx), clamp(j as i64 + dy))
}

/// Grid analogue of a maximum-length step: one move along the axis with the
/// larger remaining offset (x on ties), or stay when on the target.
pub fn move_toward(cell: usize, target: usize) -> usize {
    let (i, j) = cell_coords(cell);
    let (ti, tj) = cell_coords(target);
    let dx = ti as i64 - i as i64;
    let dy = tj as i64 - j as i64;
    if dx == 0 && dy == 0 {
        0
    } else if dx.abs() >= dy.abs() {
        if dx > 0 {
            1
        } else {
            2
        }
    } else if dy > 0 {
        3
    } else {
        4
    }
}

/// Closer of two target cells in Euclidean distance (ties to `current`).
fn closer(cell: usize, previous: usize, current: usize) -> usize {
    let d = |t: usize| {
        let (i, j) = cell_coords(cell);
        let (ti, tj) = cell_coords(t);
        (i as i64 - ti as i64).pow(2) + (j as i64 - tj as i64).pow(2)
    };
    if d(previous) < d(current) {
        previous
    } else {
        current
    }
}

fn midpoint_cell(a: usize, b: usize) -> usize {
    let (ai, aj) = cell_coords(a);
    let (bi, bj) = cell_coords(b);
    cell_index((ai + bi) / 2, (aj + bj) / 2)
}

/// The full four-corner task on a 21×21 grid: state `(k, cell)` with `k`
/// corners visited in a fixed order, plus one absorbing goal state reached
/// when the last corner is entered.
#[derive(Debug, Clone)]
pub struct PathGrid {
    pub order: [usize; 4],
    pub mdp: TabularMdp,
}

impl PathGrid {
    pub fn new(order: [usize; 4], gamma: f64) -> Self {
        let n = 4 * GRID_CELLS + 1;
        let goal = n - 1;
        let mut next = Vec::with_capacity(n * GRID_MOVES.len());
        for k in 0..4 {
            let target = corner_cell(order[k]);
            for cell in 0..GRID_CELLS {
                for a in 0..GRID_MOVES.len() {
                    let c = apply_move(cell, a);
                    next.push(match (c == target, k) {
                        (true, 3) => goal,
                        (true, _) => (k + 1) * GRID_CELLS + c,
                        (false, _) => k * GRID_CELLS + c,
                    });
                }
            }
        }
        next.extend(std::iter::repeat_n(goal, GRID_MOVES.len()));
        let mut rho0 = vec![0.0; n];
        rho0[cell_of([0.0, 0.0])] = 1.0;
        let mdp = TabularMdp::new(
            n,
            GRID_MOVES.len(),
            gamma,
            &[goal],
            rho0,
            Dynamics::Deterministic(next),
        )
        .expect("valid grid");
        PathGrid { order, mdp }
    }

    pub fn goal_state(&self) -> usize {
        4 * GRID_CELLS
    }

    /// `(k, cell)` for non-goal states.
    pub fn decode(&self, s: usize) -> Option<(usize, usize)> {
        (s < self.goal_state()).then_some((s / GRID_CELLS, s % GRID_CELLS))
    }

    fn policy(&self, f: impl Fn(usize, usize) -> usize) -> TabularPolicy {
        let mut actions: Vec<usize> = (0..self.goal_state())
            .map(|s| f(s / GRID_CELLS, s % GRID_CELLS))
            .collect();
        actions.push(0);
        TabularPolicy::Deterministic(actions)
    }

    fn previous_cell(&self, k: usize) -> usize {
        if k == 0 {
            cell_of([0.0, 0.0])
        } else {
            corner_cell(self.order[k - 1])
        }
    }

    pub fn corner_teacher(&self, corner: usize) -> TabularPolicy {
        let target = corner_cell(corner);
        self.policy(|_, cell| move_toward(cell, target))
    }

    pub fn sufficient_teacher(&self) -> TabularPolicy {
        self.policy(|k, cell| move_toward(cell, corner_cell(self.order[k])))
    }

    pub fn midpoint_teacher(&self) -> TabularPolicy {
        self.policy(|k, cell| {
            move_toward(
                cell,
                midpoint_cell(self.previous_cell(k), corner_cell(self.order[k])),
            )
        })
    }

    pub fn endpoint_teacher(&self) -> TabularPolicy {
        self.policy(|k, cell| {
            move_toward(
                cell,
                closer(cell, self.previous_cell(k), corner_cell(self.order[k])),
            )
        })
    }
}

/// One leg of the task: start on `previous`'s corner cell, goal on
/// `current`'s. With `midpoint_goal` the midpoint cell is also a goal.
#[derive(Debug, Clone)]
pub struct PathSegment {
    pub previous: usize,
    pub current: usize,
    pub mdp: TabularMdp,
}

impl PathSegment {
    pub fn new(previous: usize, current: usize, midpoint_goal: bool, gamma: f64) -> Self {
        let mut goals = vec![corner_cell(current)];
        if midpoint_goal {
            goals.push(midpoint_cell(corner_cell(previous), corner_cell(current)));
        }
        let mut next = Vec::with_capacity(GRID_CELLS * GRID_MOVES.len());
        for cell in 0..GRID_CELLS {
            for a in 0..GRID_MOVES.len() {
                next.push(if goals.contains(&cell) {
                    cell
                } else {
                    apply_move(cell, a)
                });
            }
        }
        let mut rho0 = vec![0.0; GRID_CELLS];
        rho0[corner_cell(previous)] = 1.0;
        let mdp = TabularMdp::new(
            GRID_CELLS,
            GRID_MOVES.len(),
            gamma,
            &goals,
            rho0,
            Dynamics::Deterministic(next),
        )
        .expect("valid segment");
        PathSegment {
            previous,
            current,
            mdp,
        }
    }

    pub fn midpoint_teacher(&self) -> TabularPolicy {
        let m = midpoint_cell(corner_cell(self.previous), corner_cell(self.current));
        TabularPolicy::Deterministic((0..GRID_CELLS).map(|c| move_toward(c, m)).collect())
    }

    pub fn endpoint_teacher(&self) -> TabularPolicy {
        let (p, q) = (corner_cell(self.previous), corner_cell(self.current));
        TabularPolicy::Deterministic(
            (0..GRID_CELLS)
                .map(|c| move_toward(c, closer(c, p, q)))
                .collect(),
        )
    }
}
