//! The teacher-guided behavioral policy: collect proposals from the agent and
//! every teacher, pick one by Thompson sampling over the dropout posterior,
//! then keep or drop the previous choice depending on how likely the new one
//! is to be better.

use std::fmt;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::critic::{
    commitment_threshold, fit_gaussian, posterior_samples_batch, prob_improvement,
};
use crate::envs::path::{
    clip_action, Action, Observation, PathFollowingState, ACTION_DIM, OBS_DIM,
};
use crate::error::{Error, Result};
use crate::nn::{MaskBatch, Mlp};
use crate::teachers::TeacherSet;
use crate::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyChoice {
    Agent,
    /// Zero-based position in the teacher set.
    Teacher(usize),
}

impl PolicyChoice {
    /// Position in the proposal list (agent first).
    pub fn index(self) -> usize {
        match self {
            PolicyChoice::Agent => 0,
            PolicyChoice::Teacher(i) => i + 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            PolicyChoice::Agent
        } else {
            PolicyChoice::Teacher(i - 1)
        }
    }
}

impl fmt::Display for PolicyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyChoice::Agent => f.write_str("agent"),
            PolicyChoice::Teacher(i) => write!(f, "teacher_{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub choice: PolicyChoice,
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommitmentState {
    pub prev_choice: Option<PolicyChoice>,
    /// Consecutive steps the previous choice has been retained.
    pub t_c: u32,
}

impl CommitmentState {
    pub fn reset(&mut self) {
        *self = CommitmentState::default();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorConfig {
    pub beta: f64,
    pub psi: f64,
    /// Posterior samples per candidate in the improvement test.
    pub k: usize,
    /// Dropout precision used in the Gaussian fit.
    pub tau: f64,
    /// Std of the Gaussian noise on the agent's proposal.
    pub exploration_sigma: f64,
    /// Select with the dropout-free critic instead of a posterior sample.
    pub greedy_selection: bool,
    /// Reset `t_c` when the proposal agrees with the previous choice.
    pub reset_on_agree: bool,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        BehaviorConfig {
            beta: 0.6,
            psi: 0.99,
            k: 50,
            tau: 10.0,
            exploration_sigma: 0.3,
            greedy_selection: false,
            reset_on_agree: false,
        }
    }
}

impl BehaviorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig("beta must lie in [0, 1]".into()));
        }
        if !(self.psi > 0.0 && self.psi <= 1.0) {
            return Err(Error::InvalidConfig("psi must lie in (0, 1]".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig(
                "tau_precision must be positive".into(),
            ));
        }
        if !(self.exploration_sigma >= 0.0) {
            return Err(Error::InvalidConfig(
                "exploration sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Deterministic actor output for one observation.
pub fn actor_action(actor: &Mlp, obs: &Observation) -> Result<Action> {
    let out = actor.forward(obs, None)?;
    if out.len() != ACTION_DIM {
        return Err(Error::Shape(format!("actor emits {} values", out.len())));
    }
    Ok([out[0], out[1]])
}

/// Actor output plus `N(0, σ²)` per axis, clipped. No draws when `σ == 0`.
pub fn exploratory_action<R: Rng + ?Sized>(
    actor: &Mlp,
    obs: &Observation,
    sigma: f64,
    rng: &mut R,
) -> Result<Action> {
    let a = actor_action(actor, obs)?;
    if sigma <= 0.0 {
        return Ok(clip_action(a));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(clip_action([
        a[0] + normal.sample(rng),
        a[1] + normal.sample(rng),
    ]))
}

/// Agent proposal first, then each teacher in set order, each teacher
/// drawing from its own stream.
pub fn collect_proposals<R: Rng + ?Sized>(
    state: &PathFollowingState,
    actor: &Mlp,
    exploration_sigma: f64,
    teachers: &TeacherSet,
    explore_rng: &mut R,
    teacher_rngs: &mut [StreamRng],
) -> Result<Vec<Proposal>> {
    if teacher_rngs.len() != teachers.len() {
        return Err(Error::Shape(format!(
            "{} teacher streams for {} teachers",
            teacher_rngs.len(),
            teachers.len()
        )));
    }
    let obs = state.observation();
    let mut out = Vec::with_capacity(teachers.len() + 1);
    out.push(Proposal {
        choice: PolicyChoice::Agent,
        action: exploratory_action(actor, &obs, exploration_sigma, explore_rng)?,
    });
    for (i, (t, rng)) in teachers
        .teachers
        .iter()
        .zip(teacher_rngs.iter_mut())
        .enumerate()
    {
        out.push(Proposal {
            choice: PolicyChoice::Teacher(i),
            action: t.action(state, rng),
        });
    }
    Ok(out)
}

/// Critic inputs `[obs, a_i]` for every proposal.
pub fn proposal_inputs(obs: &Observation, proposals: &[Proposal]) -> Array2<f64> {
    let mut x = Array2::zeros((proposals.len(), OBS_DIM + ACTION_DIM));
    for (i, p) in proposals.iter().enumerate() {
        let mut row = x.row_mut(i);
        for (j, &v) in obs.iter().chain(p.action.iter()).enumerate() {
            row[j] = v;
        }
    }
    x
}

fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Argmax of the dropout-free critic over proposals; ties go to the lowest
/// index.
pub fn greedy_select(critic: &Mlp, obs: &Observation, proposals: &[Proposal]) -> Result<usize> {
    if proposals.is_empty() {
        return Err(Error::InvalidConfig("no proposals".into()));
    }
    let q = critic.forward_batch(proposal_inputs(obs, proposals).view(), None)?;
    Ok(argmax_first(q.column(0).iter().copied()))
}

/// Argmax over proposals under one posterior sample shared by all of them.
pub fn thompson_select<R: Rng + ?Sized>(
    critic: &Mlp,
    obs: &Observation,
    proposals: &[Proposal],
    rng: &mut R,
) -> Result<usize> {
    if proposals.is_empty() {
        return Err(Error::InvalidConfig("no proposals".into()));
    }
    let mask = critic.sample_mask(rng);
    let masks = MaskBatch::broadcast(&mask, proposals.len());
    let q = critic.forward_batch(proposal_inputs(obs, proposals).view(), Some(&masks))?;
    Ok(argmax_first(q.column(0).iter().copied()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommitOutcome {
    /// Proposal index that will be executed.
    pub index: usize,
    /// Improvement probability, when the test ran.
    pub p_better: Option<f64>,
    /// The test ran and the previous choice overrode the proposal.
    pub retained: bool,
}

/// Decide between the Thompson proposal and the previous choice, updating
/// the commitment state.
pub fn commitment_filter<R: Rng + ?Sized>(
    proposed: usize,
    obs: &Observation,
    proposals: &[Proposal],
    critic: &Mlp,
    commit: &mut CommitmentState,
    cfg: &BehaviorConfig,
    rng: &mut R,
) -> Result<CommitOutcome> {
    if proposed >= proposals.len() {
        return Err(Error::Index(format!(
            "proposal {proposed} of {}",
            proposals.len()
        )));
    }
    let proposed_choice = proposals[proposed].choice;
    let prev = match commit.prev_choice {
        None => {
            commit.prev_choice = Some(proposed_choice);
            commit.t_c = 0;
            return Ok(CommitOutcome {
                index: proposed,
                p_better: None,
                retained: false,
            });
        }
        Some(p) => p,
    };
    if prev == proposed_choice {
        if cfg.reset_on_agree {
            commit.t_c = 0;
        }
        return Ok(CommitOutcome {
            index: proposed,
            p_better: None,
            retained: false,
        });
    }
    let prev_index = proposals
        .iter()
        .position(|p| p.choice == prev)
        .ok_or_else(|| Error::Index(format!("previous choice {prev} not among proposals")))?;
    let pair = [proposals[proposed], proposals[prev_index]];
    let samples = posterior_samples_batch(critic, proposal_inputs(obs, &pair).view(), cfg.k, rng)?;
    let z_new = fit_gaussian(samples.row(0).as_slice().expect("contiguous"), cfg.tau)?;
    let z_prev = fit_gaussian(samples.row(1).as_slice().expect("contiguous"), cfg.tau)?;
    let p_better = prob_improvement(z_new, z_prev);
    if p_better >= commitment_threshold(cfg.beta, cfg.psi, commit.t_c) {
        commit.prev_choice = Some(proposed_choice);
        commit.t_c = 0;
        Ok(CommitOutcome {
            index: proposed,
            p_better: Some(p_better),
            retained: false,
        })
    } else {
        commit.t_c += 1;
        Ok(CommitOutcome {
            index: prev_index,
            p_better: Some(p_better),
            retained: true,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorStep {
    pub action: Action,
    pub choice: PolicyChoice,
    /// Index chosen by Thompson sampling before the commitment test.
    pub proposed: usize,
    pub outcome: CommitOutcome,
    pub proposals: Vec<Proposal>,
}

/// One full step of the behavioral policy.
#[allow(clippy::too_many_arguments)]
pub fn behavioral_action(
    state: &PathFollowingState,
    actor: &Mlp,
    teachers: &TeacherSet,
    critic: &Mlp,
    commit: &mut CommitmentState,
    cfg: &BehaviorConfig,
    explore_rng: &mut StreamRng,
    teacher_rngs: &mut [StreamRng],
    dropout_rng: &mut StreamRng,
) -> Result<BehaviorStep> {
    let proposals = collect_proposals(
        state,
        actor,
        cfg.exploration_sigma,
        teachers,
        explore_rng,
        teacher_rngs,
    )?;
    let obs = state.observation();
    let proposed = if cfg.greedy_selection {
        greedy_select(critic, &obs, &proposals)?
    } else {
        thompson_select(critic, &obs, &proposals, dropout_rng)?
    };
    let outcome = commitment_filter(proposed, &obs, &proposals, critic, commit, cfg, dropout_rng)?;
    Ok(BehaviorStep {
        action: proposals[outcome.index].action,
        choice: proposals[outcome.index].choice,
        proposed,
        outcome,
        proposals,
    })
}
