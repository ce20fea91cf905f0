//! Finite MDPs with an absorbing goal set and reward `1(s ∈ G)`.
//!
//! Text format, one MDP per file (`#` starts a comment):
//!
//! ```text
//! S A gamma
//! G: i j ...
//! rho0: p0 ... p_{S-1}
//! s a -> s'                  # deterministic
//! s a -> s0:p0 s1:p1 ...     # stochastic
//! ```
//!
//! Every `(s, a)` pair must be listed exactly once.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    /// `next[s * A + a]`.
    Deterministic(Vec<usize>),
    /// Sparse rows `(s', p)` indexed by `s * A + a`.
    Stochastic(Vec<Vec<(usize, f64)>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    is_goal: Vec<bool>,
    rho0: Vec<f64>,
    dynamics: Dynamics,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        goals: &[usize],
        rho0: Vec<f64>,
        dynamics: Dynamics,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidConfig(
                "need at least one state and one action".into(),
            ));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        let mut is_goal = vec![false; n_states];
        for &g in goals {
            if g >= n_states {
                return Err(Error::Index(format!("goal {g} with {n_states} states")));
            }
            is_goal[g] = true;
        }
        if rho0.len() != n_states || rho0.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidConfig(
                "rho0 must be a distribution over states".into(),
            ));
        }
        if (rho0.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidConfig("rho0 must sum to 1".into()));
        }
        let n_pairs = n_states * n_actions;
        match &dynamics {
            Dynamics::Deterministic(next) => {
                if next.len() != n_pairs {
                    return Err(Error::Shape(format!(
                        "expected {n_pairs} transitions, got {}",
                        next.len()
                    )));
                }
                if let Some(&bad) = next.iter().find(|&&s| s >= n_states) {
                    return Err(Error::Index(format!(
                        "successor {bad} with {n_states} states"
                    )));
                }
            }
            Dynamics::Stochastic(rows) => {
                if rows.len() != n_pairs {
                    return Err(Error::Shape(format!(
                        "expected {n_pairs} rows, got {}",
                        rows.len()
                    )));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.iter().any(|&(s, p)| s >= n_states || !(p >= 0.0)) {
                        return Err(Error::InvalidConfig(format!("bad entry in row {i}")));
                    }
                    let total: f64 = row.iter().map(|&(_, p)| p).sum();
                    if (total - 1.0).abs() > ROW_TOL {
                        return Err(Error::InvalidConfig(format!(
                            "row for (s={}, a={}) sums to {total}",
                            i / n_actions,
                            i % n_actions
                        )));
                    }
                }
            }
        }
        let mdp = TabularMdp {
            n_states,
            n_actions,
            gamma,
            is_goal,
            rho0,
            dynamics,
        };
        for g in mdp.goals() {
            for a in 0..n_actions {
                let absorbing = mdp
                    .successors(g, a)
                    .iter()
                    .all(|&(s, p)| s == g || p == 0.0);
                if !absorbing {
                    return Err(Error::InvalidConfig(format!(
                        "goal state {g} is not absorbing under action {a}"
                    )));
                }
            }
        }
        Ok(mdp)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.is_goal[s]
    }

    pub fn goals(&self) -> impl Iterator<Item = usize> + '_ {
        self.is_goal
            .iter()
            .enumerate()
            .filter(|(_, &g)| g)
            .map(|(s, _)| s)
    }

    pub fn reward(&self, s: usize) -> f64 {
        if self.is_goal[s] {
            1.0
        } else {
            0.0
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.dynamics, Dynamics::Deterministic(_))
    }

    /// Unique successor when dynamics are deterministic.
    pub fn next_state(&self, s: usize, a: usize) -> Option<usize> {
        match &self.dynamics {
            Dynamics::Deterministic(next) => Some(next[s * self.n_actions + a]),
            Dynamics::Stochastic(_) => None,
        }
    }

    /// Successor distribution as `(s', p)` pairs.
    pub fn successors(&self, s: usize, a: usize) -> Vec<(usize, f64)> {
        let i = s * self.n_actions + a;
        match &self.dynamics {
            Dynamics::Deterministic(next) => vec![(next[i], 1.0)],
            Dynamics::Stochastic(rows) => rows[i].clone(),
        }
    }

    /// Sample `(s', r)` with `r = 1(s' ∈ G)`.
    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<(usize, f64)> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::Index(format!(
                "(s={s}, a={a}) outside {}x{}",
                self.n_states, self.n_actions
            )));
        }
        let next = match &self.dynamics {
            Dynamics::Deterministic(next) => next[s * self.n_actions + a],
            Dynamics::Stochastic(rows) => {
                let row = &rows[s * self.n_actions + a];
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = row.last().map(|&(s, _)| s).unwrap_or(s);
                for &(sp, p) in row {
                    acc += p;
                    if u < acc {
                        pick = sp;
                        break;
                    }
                }
                pick
            }
        };
        Ok((next, self.reward(next)))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let parse_err = |line: usize, msg: String| Error::Parse { line, msg };

        let (ln, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(ln, "header must be `S A gamma`".into()));
        }
        let n_states: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(ln, "bad state count".into()))?;
        let n_actions: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(ln, "bad action count".into()))?;
        let gamma: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(ln, "bad gamma".into()))?;

        let mut goals = None;
        let mut rho0 = None;
        let mut det: Vec<Option<usize>> = vec![None; n_states * n_actions];
        let mut sto: Vec<Option<Vec<(usize, f64)>>> = vec![None; n_states * n_actions];
        let mut any_stochastic = false;

        for (ln, line) in lines {
            if let Some(rest) = line.strip_prefix("G:") {
                let g: std::result::Result<Vec<usize>, _> =
                    rest.split_whitespace().map(str::parse).collect();
                goals = Some(g.map_err(|_| parse_err(ln, "bad goal index".into()))?);
            } else if let Some(rest) = line.strip_prefix("rho0:") {
                let r: std::result::Result<Vec<f64>, _> =
                    rest.split_whitespace().map(str::parse).collect();
                rho0 = Some(r.map_err(|_| parse_err(ln, "bad start probability".into()))?);
            } else {
                let (lhs, rhs) = line
                    .split_once("->")
                    .ok_or_else(|| parse_err(ln, format!("unrecognised line `{line}`")))?;
                let sa: Vec<&str> = lhs.split_whitespace().collect();
                if sa.len() != 2 {
                    return Err(parse_err(ln, "transition must start with `s a`".into()));
                }
                let s: usize = sa[0]
                    .parse()
                    .map_err(|_| parse_err(ln, "bad state".into()))?;
                let a: usize = sa[1]
                    .parse()
                    .map_err(|_| parse_err(ln, "bad action".into()))?;
                if s >= n_states || a >= n_actions {
                    return Err(parse_err(ln, format!("(s={s}, a={a}) out of range")));
                }
                let i = s * n_actions + a;
                if det[i].is_some() || sto[i].is_some() {
                    return Err(parse_err(
                        ln,
                        format!("duplicate transition for (s={s}, a={a})"),
                    ));
                }
                let targets: Vec<&str> = rhs.split_whitespace().collect();
                if targets.len() == 1 && !targets[0].contains(':') {
                    let sp: usize = targets[0]
                        .parse()
                        .map_err(|_| parse_err(ln, "bad successor".into()))?;
                    det[i] = Some(sp);
                    sto[i] = Some(vec![(sp, 1.0)]);
                } else {
                    any_stochastic = true;
                    let mut row = Vec::with_capacity(targets.len());
                    for t in targets {
                        let (sp, p) = t
                            .split_once(':')
                            .ok_or_else(|| parse_err(ln, format!("expected `s:p`, got `{t}`")))?;
                        let sp: usize = sp
                            .parse()
                            .map_err(|_| parse_err(ln, "bad successor".into()))?;
                        let p: f64 = p
                            .parse()
                            .map_err(|_| parse_err(ln, "bad probability".into()))?;
                        row.push((sp, p));
                    }
                    sto[i] = Some(row);
                }
            }
        }

        let goals = goals.ok_or_else(|| parse_err(0, "missing `G:` line".into()))?;
        let rho0 = rho0.ok_or_else(|| parse_err(0, "missing `rho0:` line".into()))?;
        if let Some(i) = sto.iter().position(Option::is_none) {
            return Err(parse_err(
                0,
                format!(
                    "missing transition for (s={}, a={})",
                    i / n_actions,
                    i % n_actions
                ),
            ));
        }
        let dynamics = if any_stochastic {
            Dynamics::Stochastic(sto.into_iter().map(Option::unwrap).collect())
        } else {
            Dynamics::Deterministic(det.into_iter().map(Option::unwrap).collect())
        };
        TabularMdp::new(n_states, n_actions, gamma, &goals, rho0, dynamics)
    }

    /// Serialise to the text format accepted by [`TabularMdp::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.n_states, self.n_actions, self.gamma);
        let goals: Vec<String> = self.goals().map(|g| g.to_string()).collect();
        let _ = writeln!(out, "G: {}", goals.join(" "));
        let rho: Vec<String> = self.rho0.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(out, "rho0: {}", rho.join(" "));
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                match &self.dynamics {
                    Dynamics::Deterministic(next) => {
                        let _ = writeln!(out, "{s} {a} -> {}", next[s * self.n_actions + a]);
                    }
                    Dynamics::Stochastic(rows) => {
                        let row: Vec<String> = rows[s * self.n_actions + a]
                            .iter()
                            .map(|(sp, p)| format!("{sp}:{p}"))
                            .collect();
                        let _ = writeln!(out, "{s} {a} -> {}", row.join(" "));
                    }
                }
            }
        }
        out
    }
}

/// Policy over a tabular MDP.
#[derive(Debug, Clone, PartialEq)]
pub enum TabularPolicy {
    Deterministic(Vec<usize>),
    /// `probs[s][a]`.
    Stochastic(Vec<Vec<f64>>),
}

impl TabularPolicy {
    pub fn is_deterministic(&self) -> bool {
        matches!(self, TabularPolicy::Deterministic(_))
    }

    pub fn n_states(&self) -> usize {
        match self {
            TabularPolicy::Deterministic(a) => a.len(),
            TabularPolicy::Stochastic(p) => p.len(),
        }
    }

    /// `(a, π(a|s))` pairs with positive probability.
    pub fn action_probs(&self, s: usize) -> Vec<(usize, f64)> {
        match self {
            TabularPolicy::Deterministic(a) => vec![(a[s], 1.0)],
            TabularPolicy::Stochastic(p) => p[s]
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > 0.0)
                .map(|(a, &q)| (a, q))
                .collect(),
        }
    }

    pub fn validate(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states() != mdp.n_states() {
            return Err(Error::Shape(format!(
                "policy covers {} states, MDP has {}",
                self.n_states(),
                mdp.n_states()
            )));
        }
        match self {
            TabularPolicy::Deterministic(a) => {
                if let Some(bad) = a.iter().find(|&&a| a >= mdp.n_actions()) {
                    return Err(Error::Index(format!(
                        "action {bad} with {} actions",
                        mdp.n_actions()
                    )));
                }
            }
            TabularPolicy::Stochastic(rows) => {
                for (s, row) in rows.iter().enumerate() {
                    if row.len() != mdp.n_actions() || row.iter().any(|&p| !(p >= 0.0)) {
                        return Err(Error::Shape(format!(
                            "policy row {s} is not a distribution over actions"
                        )));
                    }
                    if (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
                        return Err(Error::InvalidConfig(format!(
                            "policy row {s} does not sum to 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// One line per state: a single action index, or `A` probabilities.
    pub fn parse(text: &str, n_actions: usize) -> Result<Self> {
        let mut det = Vec::new();
        let mut rows = Vec::new();
        let mut all_det = true;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            if tokens.len() == 1 {
                if let Ok(a) = tokens[0].parse::<usize>() {
                    if a >= n_actions {
                        return Err(err("action index out of range"));
                    }
                    let mut row = vec![0.0; n_actions];
                    row[a] = 1.0;
                    det.push(a);
                    rows.push(row);
                    continue;
                }
            }
            if tokens.len() != n_actions {
                return Err(err(
                    "expected an action index or one probability per action",
                ));
            }
            let row: std::result::Result<Vec<f64>, _> =
                tokens.iter().map(|t| t.parse::<f64>()).collect();
            let row = row.map_err(|_| err("bad probability"))?;
            all_det = false;
            det.push(0);
            rows.push(row);
        }
        if all_det {
            Ok(TabularPolicy::Deterministic(det))
        } else {
            Ok(TabularPolicy::Stochastic(rows))
        }
    }
}
