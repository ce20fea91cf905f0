//! Exact teacher-attribute analysis on tabular MDPs.
//!
//! Values follow `V(s) = 1(s ∈ G) + γ · E[V(s')]`, so a goal state is worth
//! `1 / (1 − γ)` and a state first reaching `G` after `t` transitions is worth
//! `γ^t / (1 − γ)`.

pub mod fixtures;

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::envs::tabular::{TabularMdp, TabularPolicy};
use crate::error::{Error, Result};

pub const VALUE_TOLERANCE: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 100_000;

/// Slack used when comparing values produced by iterative solvers.
const COMPARE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub gamma: f64,
    /// Max-norm change of each sweep; empty for closed-form tables.
    pub residuals: Vec<f64>,
}

impl ValueTable {
    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }
}

/// Reaching time per state; `None` means the goal set is never entered.
pub type ReachTable = Vec<Option<usize>>;

/// Policy-induced successor distribution for every state.
fn policy_successors(mdp: &TabularMdp, policy: &TabularPolicy) -> Vec<Vec<(usize, f64)>> {
    (0..mdp.n_states())
        .map(|s| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for (a, pa) in policy.action_probs(s) {
                for (sp, p) in mdp.successors(s, a) {
                    if p * pa == 0.0 {
                        continue;
                    }
                    match row.iter_mut().find(|(x, _)| *x == sp) {
                        Some(entry) => entry.1 += p * pa,
                        None => row.push((sp, p * pa)),
                    }
                }
            }
            row
        })
        .collect()
}

/// Iterative policy evaluation to a max-norm residual below [`VALUE_TOLERANCE`].
pub fn policy_value(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<ValueTable> {
    policy.validate(mdp)?;
    let rows = policy_successors(mdp, policy);
    let gamma = mdp.gamma();
    let mut v = vec![0.0; mdp.n_states()];
    let mut residuals = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let next: Vec<f64> = (0..mdp.n_states())
            .map(|s| mdp.reward(s) + gamma * rows[s].iter().map(|&(sp, p)| p * v[sp]).sum::<f64>())
            .collect();
        let res = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        residuals.push(res);
        if res < VALUE_TOLERANCE {
            break;
        }
    }
    Ok(ValueTable {
        values: v,
        gamma,
        residuals,
    })
}

/// Value iteration for `V*` to a max-norm residual below [`VALUE_TOLERANCE`].
pub fn value_iteration(mdp: &TabularMdp) -> ValueTable {
    let gamma = mdp.gamma();
    let rows: Vec<Vec<Vec<(usize, f64)>>> = (0..mdp.n_states())
        .map(|s| (0..mdp.n_actions()).map(|a| mdp.successors(s, a)).collect())
        .collect();
    let mut v = vec![0.0; mdp.n_states()];
    let mut residuals = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let next: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(s, acts)| {
                let best = acts
                    .iter()
                    .map(|row| row.iter().map(|&(sp, p)| p * v[sp]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                mdp.reward(s) + gamma * best
            })
            .collect();
        let res = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        residuals.push(res);
        if res < VALUE_TOLERANCE {
            break;
        }
    }
    ValueTable {
        values: v,
        gamma,
        residuals,
    }
}

/// Shortest number of transitions to `G` from every state, by reverse BFS.
/// Deterministic dynamics only.
pub fn shortest_reach_times(mdp: &TabularMdp) -> Result<ReachTable> {
    if !mdp.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let mut preds = vec![Vec::new(); mdp.n_states()];
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let sp = mdp.next_state(s, a).expect("deterministic");
            preds[sp].push(s);
        }
    }
    let mut dist: ReachTable = vec![None; mdp.n_states()];
    let mut queue = VecDeque::new();
    for g in mdp.goals() {
        dist[g] = Some(0);
        queue.push_back(g);
    }
    while let Some(s) = queue.pop_front() {
        let d = dist[s].expect("queued states have a distance");
        for &p in &preds[s] {
            if dist[p].is_none() {
                dist[p] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
    Ok(dist)
}

/// Values implied by reaching times: `γ^t / (1 − γ)`, or 0 when unreachable.
pub fn values_from_reach_times(times: &ReachTable, gamma: f64) -> Vec<f64> {
    times
        .iter()
        .map(|t| t.map_or(0.0, |t| gamma.powi(t as i32) / (1.0 - gamma)))
        .collect()
}

/// `V*`: closed form from shortest paths for deterministic dynamics, value
/// iteration otherwise.
pub fn optimal_value(mdp: &TabularMdp) -> ValueTable {
    match shortest_reach_times(mdp) {
        Ok(times) => ValueTable {
            values: values_from_reach_times(&times, mdp.gamma()),
            gamma: mdp.gamma(),
            residuals: Vec::new(),
        },
        Err(_) => value_iteration(mdp),
    }
}

/// Reaching time of a deterministic policy by following its unique chain.
pub fn reach_times(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<ReachTable> {
    let actions = match policy {
        TabularPolicy::Deterministic(a) if mdp.is_deterministic() => a,
        _ => return Err(Error::NotDeterministic),
    };
    policy.validate(mdp)?;
    let n = mdp.n_states();
    let next: Vec<usize> = (0..n)
        .map(|s| mdp.next_state(s, actions[s]).expect("deterministic"))
        .collect();
    let mut times: ReachTable = vec![None; n];
    let mut resolved = vec![false; n];
    for start in 0..n {
        if resolved[start] {
            continue;
        }
        let mut path = Vec::new();
        let mut on_path = vec![false; n];
        let mut s = start;
        let tail = loop {
            if resolved[s] {
                break times[s];
            }
            if mdp.is_goal(s) {
                times[s] = Some(0);
                resolved[s] = true;
                break Some(0);
            }
            if on_path[s] {
                break None;
            }
            on_path[s] = true;
            path.push(s);
            s = next[s];
        };
        let mut t = tail;
        for &p in path.iter().rev() {
            t = t.map(|t| t + 1);
            times[p] = t;
            resolved[p] = true;
        }
    }
    Ok(times)
}

/// Checks that `V(s) > V(s') ⇔ t(s) < t(s')` for every ordered pair, with
/// `V` from policy evaluation and `t` from [`reach_times`]. Returns the first
/// violating pair.
pub fn verify_proposition(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
) -> Result<Option<(usize, usize)>> {
    let times = reach_times(mdp, policy)?;
    let v = policy_value(mdp, policy)?.values;
    let n = mdp.n_states();
    for (s, &ts) in times.iter().enumerate() {
        if ts.is_none() && v[s].abs() > COMPARE_TOL {
            return Ok(Some((s, s)));
        }
        for (sp, &tsp) in times.iter().enumerate().take(n) {
            let v_greater = v[s] > v[sp] + COMPARE_TOL;
            let t_less = match (ts, tsp) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => true,
                _ => false,
            };
            if v_greater != t_less {
                return Ok(Some((s, sp)));
            }
        }
    }
    Ok(None)
}

/// `E_{a∼π(s), s'}[V(s')]` for every state.
fn expected_next_values(mdp: &TabularMdp, policy: &TabularPolicy, v: &[f64]) -> Vec<f64> {
    policy_successors(mdp, policy)
        .iter()
        .map(|row| row.iter().map(|&(sp, p)| p * v[sp]).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub holds: bool,
    pub witness: Vec<usize>,
}

/// Partial teacher test: the witness is every state where following the
/// teacher moves to a state of strictly higher optimal value (in expectation).
pub fn is_partial(mdp: &TabularMdp, teacher: &TabularPolicy) -> Result<Classification> {
    teacher.validate(mdp)?;
    let v_star = optimal_value(mdp).values;
    is_partial_with(mdp, teacher, &v_star)
}

/// [`is_partial`] with a precomputed `V*`.
pub fn is_partial_with(
    mdp: &TabularMdp,
    teacher: &TabularPolicy,
    v_star: &[f64],
) -> Result<Classification> {
    teacher.validate(mdp)?;
    let next = expected_next_values(mdp, teacher, v_star);
    let witness: Vec<usize> = (0..mdp.n_states())
        .filter(|&s| next[s] > v_star[s] + COMPARE_TOL * (1.0 + v_star[s].abs()))
        .collect();
    Ok(Classification {
        holds: !witness.is_empty() && witness.len() < mdp.n_states(),
        witness,
    })
}

fn start_states(mdp: &TabularMdp) -> impl Iterator<Item = usize> + '_ {
    mdp.rho0()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, _)| s)
}

/// Single-teacher sufficiency: positive value at some start state.
pub fn is_sufficient(mdp: &TabularMdp, teacher: &TabularPolicy) -> Result<bool> {
    let v = policy_value(mdp, teacher)?.values;
    Ok(start_states(mdp).any(|s| v[s] > 0.0))
}

/// Set sufficiency: `G` reachable with positive probability from some start
/// state when each state's action menu is the teachers' actions there.
pub fn is_set_sufficient(mdp: &TabularMdp, teachers: &[TabularPolicy]) -> Result<bool> {
    for t in teachers {
        t.validate(mdp)?;
    }
    let n = mdp.n_states();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = start_states(mdp).collect();
    for &s in &queue {
        seen[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        if mdp.is_goal(s) {
            return Ok(true);
        }
        for t in teachers {
            for (a, _) in t.action_probs(s) {
                for (sp, p) in mdp.successors(s, a) {
                    if p > 0.0 && !seen[sp] {
                        seen[sp] = true;
                        queue.push_back(sp);
                    }
                }
            }
        }
    }
    Ok(false)
}

/// Whether following `pi2` lowers `pi1`'s value somewhere (in expectation).
pub fn is_contradictory(
    mdp: &TabularMdp,
    pi2: &TabularPolicy,
    pi1: &TabularPolicy,
) -> Result<Classification> {
    pi2.validate(mdp)?;
    let v1 = policy_value(mdp, pi1)?.values;
    let next = expected_next_values(mdp, pi2, &v1);
    let witness: Vec<usize> = (0..mdp.n_states())
        .filter(|&s| next[s] < v1[s] - COMPARE_TOL * (1.0 + v1[s].abs()))
        .collect();
    Ok(Classification {
        holds: !witness.is_empty(),
        witness,
    })
}

/// Probability of reaching `G` and the conditional expected discounted worth
/// `E[γ^t / (1 − γ) | reach]` from `s0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachDecomposition {
    pub p_reach: f64,
    pub conditional_worth: f64,
}

impl ReachDecomposition {
    pub fn value(&self) -> f64 {
        self.p_reach * self.conditional_worth
    }
}

/// Computes the first-entry time distribution of `G` by propagating
/// probability mass forward. Mass in states that cannot reach `G` is
/// dropped; propagation stops once the unresolved mass and its possible
/// value contribution are both below `tail_tol`.
pub fn reach_decomposition(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    s0: usize,
    tail_tol: f64,
) -> Result<ReachDecomposition> {
    policy.validate(mdp)?;
    if s0 >= mdp.n_states() {
        return Err(Error::Index(format!("start state {s0}")));
    }
    let rows = policy_successors(mdp, policy);
    let live = reaches_goal(mdp, &rows);
    let gamma = mdp.gamma();
    let mut mass = vec![0.0; mdp.n_states()];
    mass[s0] = 1.0;
    let mut p_reach = 0.0;
    let mut weighted = 0.0;
    let mut discount = 1.0 / (1.0 - gamma);
    for _ in 0..10_000_000usize {
        let mut remaining = 0.0;
        for (s, m) in mass.iter_mut().enumerate() {
            if *m > 0.0 && mdp.is_goal(s) {
                p_reach += *m;
                weighted += *m * discount;
                *m = 0.0;
            } else if !live[s] {
                *m = 0.0;
            }
            remaining += *m;
        }
        discount *= gamma;
        if remaining < tail_tol && remaining * discount < tail_tol {
            break;
        }
        let mut next = vec![0.0; mdp.n_states()];
        for (s, &m) in mass.iter().enumerate() {
            if m > 0.0 {
                for &(sp, p) in &rows[s] {
                    next[sp] += m * p;
                }
            }
        }
        mass = next;
    }
    let conditional_worth = if p_reach > 0.0 {
        weighted / p_reach
    } else {
        0.0
    };
    Ok(ReachDecomposition {
        p_reach,
        conditional_worth,
    })
}

/// States from which `G` is entered with positive probability.
fn reaches_goal(mdp: &TabularMdp, rows: &[Vec<(usize, f64)>]) -> Vec<bool> {
    let n = mdp.n_states();
    let mut preds = vec![Vec::new(); n];
    for (s, row) in rows.iter().enumerate() {
        for &(sp, p) in row {
            if p > 0.0 {
                preds[sp].push(s);
            }
        }
    }
    let mut live: Vec<bool> = (0..n).map(|s| mdp.is_goal(s)).collect();
    let mut queue: VecDeque<usize> = mdp.goals().collect();
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !live[p] {
                live[p] = true;
                queue.push_back(p);
            }
        }
    }
    live
}

/// Full attribute report for one MDP and a list of teachers.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub deterministic: bool,
    pub start_values: Vec<f64>,
    pub partial: Vec<Classification>,
    pub sufficient: Vec<bool>,
    pub set_sufficient: bool,
    /// `(i, j, result)` for "teacher i contradicts teacher j".
    pub contradictions: Vec<(usize, usize, Classification)>,
    /// First proposition counterexample per deterministic teacher.
    pub proposition: Vec<Option<Option<(usize, usize)>>>,
}

pub fn audit(mdp: &TabularMdp, teachers: &[TabularPolicy]) -> Result<AuditReport> {
    let v_star = optimal_value(mdp).values;
    let mut start_values = Vec::new();
    let mut partial = Vec::new();
    let mut sufficient = Vec::new();
    let mut proposition = Vec::new();
    for t in teachers {
        let v = policy_value(mdp, t)?.values;
        let v0: f64 = mdp.rho0().iter().zip(&v).map(|(p, v)| p * v).sum();
        start_values.push(v0);
        partial.push(is_partial_with(mdp, t, &v_star)?);
        sufficient.push(is_sufficient(mdp, t)?);
        proposition.push(match verify_proposition(mdp, t) {
            Ok(r) => Some(r),
            Err(Error::NotDeterministic) => None,
            Err(e) => return Err(e),
        });
    }
    let mut contradictions = Vec::new();
    for i in 0..teachers.len() {
        for j in 0..teachers.len() {
            if i != j {
                contradictions.push((i, j, is_contradictory(mdp, &teachers[i], &teachers[j])?));
            }
        }
    }
    Ok(AuditReport {
        n_states: mdp.n_states(),
        n_actions: mdp.n_actions(),
        gamma: mdp.gamma(),
        deterministic: mdp.is_deterministic()
            && teachers.iter().all(TabularPolicy::is_deterministic),
        start_values,
        partial,
        sufficient,
        set_sufficient: is_set_sufficient(mdp, teachers)?,
        contradictions,
        proposition,
    })
}

impl AuditReport {
    /// Human-readable summary followed by a `key=value` block.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "MDP: {} states, {} actions, gamma {}, {}",
            self.n_states,
            self.n_actions,
            self.gamma,
            if self.deterministic {
                "deterministic"
            } else {
                "stochastic"
            }
        );
        for (i, p) in self.partial.iter().enumerate() {
            let _ = writeln!(
                out,
                "teacher {i}: start value {:.6}, {}, {} ({} improving states)",
                self.start_values[i],
                if self.sufficient[i] {
                    "sufficient"
                } else {
                    "insufficient"
                },
                if p.holds { "partial" } else { "not partial" },
                p.witness.len()
            );
        }
        let _ = writeln!(
            out,
            "teacher set: {}",
            if self.set_sufficient {
                "sufficient"
            } else {
                "insufficient"
            }
        );
        for (i, j, c) in &self.contradictions {
            if c.holds {
                let _ = writeln!(
                    out,
                    "teacher {i} contradicts teacher {j} in {} states",
                    c.witness.len()
                );
            }
        }
        let _ = writeln!(out, "---");
        let _ = writeln!(out, "states={}", self.n_states);
        let _ = writeln!(out, "actions={}", self.n_actions);
        let _ = writeln!(out, "gamma={}", self.gamma);
        let _ = writeln!(out, "deterministic={}", self.deterministic);
        let _ = writeln!(out, "teachers={}", self.partial.len());
        for (i, p) in self.partial.iter().enumerate() {
            let _ = writeln!(out, "teacher.{i}.start_value={}", self.start_values[i]);
            let _ = writeln!(out, "teacher.{i}.sufficient={}", self.sufficient[i]);
            let _ = writeln!(out, "teacher.{i}.partial={}", p.holds);
            let _ = writeln!(out, "teacher.{i}.partial_witness_count={}", p.witness.len());
            if let Some(r) = self.proposition[i] {
                let _ = writeln!(out, "teacher.{i}.proposition_holds={}", r.is_none());
            }
        }
        let _ = writeln!(out, "set.sufficient={}", self.set_sufficient);
        for (i, j, c) in &self.contradictions {
            let _ = writeln!(out, "contradicts.{i}.{j}={}", c.holds);
        }
        out
    }
}
