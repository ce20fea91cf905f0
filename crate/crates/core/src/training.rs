//! Replay buffer, the collect/update loop and evaluation.

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::baselines::{random_select, DqnConfig, DqnSelector, Method};
use crate::behavior::{
    actor_action, behavioral_action, commitment_filter, exploratory_action, greedy_select,
    proposal_inputs, BehaviorConfig, CommitmentState, PolicyChoice, Proposal,
};
use crate::critic::{
    actor_loss_and_grad, behavioral_target, critic_loss_and_grad, point_critic_loss_and_grad,
    CriticConfig,
};
use crate::envs::path::{
    step_state, Action, Observation, PathFollowing, PathFollowingState, ACTION_DIM, MAX_STEP,
    OBS_DIM,
};
use crate::error::{Error, Result};
use crate::harness::seeds::{self, SeedStreams};
use crate::nn::{Activation, Adam, Init, MaskBatch, Mlp};
use crate::teachers::{TeacherSet, DEFAULT_NOISE_SIGMA};
use crate::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
    /// Simulator state after the step, read by teachers when proposing
    /// actions for the bootstrap target.
    pub next_state: PathFollowingState,
}

/// Fixed-capacity ring buffer with uniform sampling with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    next_slot: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig(
                "replay capacity must be positive".into(),
            ));
        }
        Ok(ReplayBuffer {
            data: Vec::new(),
            capacity,
            next_slot: 0,
            inserted: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertions since creation.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.data.get(i)
    }

    pub fn insert(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next_slot] = t;
        }
        self.next_slot = (self.next_slot + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Indices of a uniform sample with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.data.is_empty() {
            return Err(Error::InvalidConfig(
                "cannot sample from an empty buffer".into(),
            ));
        }
        Ok((0..n)
            .map(|_| rng.random_range(0..self.data.len()))
            .collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Transition>> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| self.data[i])
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSchedule {
    pub steps_per_round: usize,
    pub updates_per_round: usize,
    pub total_steps: usize,
    pub batch_size: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            steps_per_round: 200,
            updates_per_round: 100,
            total_steps: 100_000,
            batch_size: 128,
            eval_every: 2000,
            eval_episodes: 10,
        }
    }
}

/// What the critic bootstraps from at the next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// The behavioral policy's greedy pick among proposals at `s'`.
    Behavioral,
    /// The target actor's action at `s'`.
    Agent,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Behavioral => "behavioral",
            TargetKind::Agent => "agent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub teachers: String,
    pub teacher_noise: f64,
    pub seed: u64,
    pub critic: CriticConfig,
    pub behavior: BehaviorConfig,
    pub schedule: TrainSchedule,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub polyak_tau: f64,
    pub hidden: Vec<usize>,
    pub final_layer_init: f64,
    pub target: TargetKind,
    /// Posterior samples averaged when choosing the target proposal; 0 uses
    /// the dropout-free critic.
    pub target_mean_samples: usize,
    /// Zero the bootstrap term on `done` transitions.
    pub done_masking: bool,
    pub replay_capacity: usize,
    /// Apply the commitment test to the point-critic baseline.
    pub point_commitment: bool,
    pub dqn: DqnConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::AcTeach,
            teachers: "four_partial_noisy".into(),
            teacher_noise: DEFAULT_NOISE_SIGMA,
            seed: 0,
            critic: CriticConfig::default(),
            behavior: BehaviorConfig::default(),
            schedule: TrainSchedule::default(),
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            polyak_tau: 0.01,
            hidden: vec![64, 64],
            final_layer_init: 3e-3,
            target: TargetKind::Behavioral,
            target_mean_samples: 0,
            done_masking: false,
            replay_capacity: 100_000,
            point_commitment: false,
            dqn: DqnConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.critic.validate()?;
        self.behavior.validate()?;
        TeacherSet::by_name(&self.teachers, self.teacher_noise)?;
        let s = &self.schedule;
        if s.steps_per_round == 0 || s.batch_size == 0 || s.eval_episodes == 0 {
            return Err(Error::InvalidConfig(
                "steps_per_round, batch_size and eval_episodes must be positive".into(),
            ));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::InvalidConfig(
                "learning rates must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.polyak_tau) {
            return Err(Error::InvalidConfig("polyak_tau must lie in [0, 1]".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden sizes must be positive".into()));
        }
        if self.replay_capacity == 0 {
            return Err(Error::InvalidConfig(
                "replay capacity must be positive".into(),
            ));
        }
        if !(self.teacher_noise >= 0.0) {
            return Err(Error::InvalidConfig(
                "teacher noise must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRow {
    pub step: usize,
    pub round: usize,
    pub mean_critic_loss: f64,
    pub mean_actor_loss: f64,
    pub behavioral_return: f64,
    /// Agent first, then each teacher.
    pub choice_fractions: Vec<f64>,
    pub switch_count: usize,
    pub retain_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub step: usize,
    pub mean: f64,
    pub std: f64,
}

/// One row as it leaves the training loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogRecord<'a> {
    Train(&'a TrainRow),
    Eval(&'a EvalRow),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub train: Vec<TrainRow>,
    pub eval: Vec<EvalRow>,
    /// Executed choice index per environment step.
    pub choices: Vec<u16>,
    /// Executed action per environment step.
    pub actions: Vec<Action>,
}

impl RunLog {
    pub fn final_eval(&self) -> Option<EvalRow> {
        self.eval.last().copied()
    }
}

/// Mean and population standard deviation of returns over `episodes` runs
/// of the deterministic actor. Episodes draw goal orders from `rng`.
pub fn evaluate<R: Rng>(actor: &Mlp, episodes: usize, rng: &mut R) -> Result<(f64, f64)> {
    evaluate_policy(|obs, _| actor_action(actor, obs), episodes, rng)
}

/// Evaluation with an arbitrary state-feedback policy.
pub fn evaluate_policy<R: Rng>(
    mut policy: impl FnMut(&Observation, &PathFollowingState) -> Result<Action>,
    episodes: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::InvalidConfig(
            "evaluation needs at least one episode".into(),
        ));
    }
    let mut env = PathFollowing::new(rng);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut total = 0.0;
        loop {
            let a = policy(&obs, env.state())?;
            let step = env.step(a)?;
            total += step.reward;
            obs = step.observation;
            if step.done {
                break;
            }
        }
        returns.push(total);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Networks and optimisers of the learning agent.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
}

impl Agent {
    pub fn new(
        cfg: &TrainConfig,
        actor_rng: &mut StreamRng,
        critic_rng: &mut StreamRng,
    ) -> Result<Self> {
        let init = Init::FanIn {
            final_layer: Some(cfg.final_layer_init),
        };
        let mut actor_sizes = vec![OBS_DIM];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(ACTION_DIM);
        let actor = Mlp::new(
            &actor_sizes,
            Activation::Relu,
            Activation::ScaledTanh(MAX_STEP),
            1.0,
            init,
            actor_rng,
        )?;
        let mut critic_sizes = vec![OBS_DIM + ACTION_DIM];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let keep = if cfg.method.bayesian() {
            cfg.critic.keep_prob
        } else {
            1.0
        };
        let critic = Mlp::new(
            &critic_sizes,
            Activation::Relu,
            Activation::Identity,
            keep,
            init,
            critic_rng,
        )?;
        Ok(Agent {
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic_opt: Adam::new(&critic, cfg.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        })
    }
}

struct Streams {
    env: StreamRng,
    teachers: Vec<StreamRng>,
    dropout: StreamRng,
    exploration: StreamRng,
    buffer: StreamRng,
    eval: StreamRng,
    target: StreamRng,
    selector: StreamRng,
}

impl Streams {
    fn new(seed: u64, n_teachers: usize) -> Self {
        let s = SeedStreams::new(seed);
        Streams {
            env: s.stream(seeds::ENV),
            teachers: (0..n_teachers).map(|i| s.teacher(i)).collect(),
            dropout: s.stream(seeds::DROPOUT),
            exploration: s.stream(seeds::EXPLORATION),
            buffer: s.stream(seeds::BUFFER),
            eval: s.stream(seeds::EVAL),
            target: s.stream(seeds::TARGET),
            selector: s.stream(seeds::SELECTOR),
        }
    }
}

/// Everything a training run owns.
pub struct Trainer {
    cfg: TrainConfig,
    teachers: TeacherSet,
    agent: Agent,
    buffer: ReplayBuffer,
    dqn: Option<DqnSelector>,
    streams: Streams,
    env: PathFollowingState,
    commit: CommitmentState,
    steps: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let set_name = if cfg.method == Method::Bddpg {
            "none"
        } else {
            cfg.teachers.as_str()
        };
        let teachers = TeacherSet::by_name(set_name, cfg.teacher_noise)?;
        let seeds = SeedStreams::new(cfg.seed);
        let agent = Agent::new(
            &cfg,
            &mut seeds.stream(seeds::ACTOR_INIT),
            &mut seeds.stream(seeds::CRITIC_INIT),
        )?;
        let dqn = match cfg.method {
            Method::Dqn => Some(DqnSelector::new(
                teachers.len() + 1,
                cfg.dqn,
                cfg.done_masking,
                &mut seeds.stream(seeds::SELECTOR_INIT),
            )?),
            _ => None,
        };
        let mut streams = Streams::new(cfg.seed, teachers.len());
        let env = fresh_episode(&mut streams.env);
        Ok(Trainer {
            buffer: ReplayBuffer::new(cfg.replay_capacity)?,
            cfg,
            teachers,
            agent,
            dqn,
            streams,
            env,
            commit: CommitmentState::default(),
            steps: 0,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn teachers(&self) -> &TeacherSet {
        &self.teachers
    }

    fn target_kind(&self) -> TargetKind {
        self.cfg.target
    }

    /// Choose and execute one environment step, storing the transition.
    fn env_step(&mut self, log: &mut RunLog) -> Result<(PolicyChoice, bool, f64, bool)> {
        let state = self.env;
        let obs = state.observation();
        let (action, choice, retained) = match self.cfg.method {
            Method::AcTeach | Method::Bddpg => {
                let step = behavioral_action(
                    &state,
                    &self.agent.actor,
                    &self.teachers,
                    &self.agent.critic,
                    &mut self.commit,
                    &self.cfg.behavior,
                    &mut self.streams.exploration,
                    &mut self.streams.teachers,
                    &mut self.streams.dropout,
                )?;
                (step.action, step.choice, step.outcome.retained)
            }
            Method::CriticPoint => {
                let proposals = self.proposals(&state)?;
                let proposed = greedy_select(&self.agent.critic, &obs, &proposals)?;
                let (index, retained) = if self.cfg.point_commitment {
                    let o = commitment_filter(
                        proposed,
                        &obs,
                        &proposals,
                        &self.agent.critic,
                        &mut self.commit,
                        &self.cfg.behavior,
                        &mut self.streams.dropout,
                    )?;
                    (o.index, o.retained)
                } else {
                    (proposed, false)
                };
                (proposals[index].action, proposals[index].choice, retained)
            }
            Method::Random => {
                let proposals = self.proposals(&state)?;
                let i = random_select(proposals.len(), &mut self.streams.selector);
                (proposals[i].action, proposals[i].choice, false)
            }
            Method::Dqn => {
                let proposals = self.proposals(&state)?;
                let dqn = self.dqn.as_ref().expect("dqn selector");
                let i = dqn.select(&obs, self.steps as u64, &mut self.streams.selector)?;
                (proposals[i].action, proposals[i].choice, false)
            }
        };
        let mut next = state;
        let out = step_state(&mut next, action)?;
        self.buffer.insert(Transition {
            obs,
            action,
            reward: out.reward,
            next_obs: out.observation,
            done: out.done,
            next_state: next,
        });
        if let Some(dqn) = self.dqn.as_mut() {
            dqn.record(obs, choice.index(), out.reward, out.observation, out.done);
        }
        self.steps += 1;
        if let Some(dqn) = self.dqn.as_mut() {
            dqn.maybe_train(self.steps as u64, &mut self.streams.selector)?;
        }
        log.choices.push(choice.index() as u16);
        log.actions.push(action);
        if out.done {
            self.env = fresh_episode(&mut self.streams.env);
            self.commit.reset();
        } else {
            self.env = next;
        }
        Ok((choice, retained, out.reward, out.done))
    }

    fn proposals(&mut self, state: &PathFollowingState) -> Result<Vec<Proposal>> {
        crate::behavior::collect_proposals(
            state,
            &self.agent.actor,
            self.cfg.behavior.exploration_sigma,
            &self.teachers,
            &mut self.streams.exploration,
            &mut self.streams.teachers,
        )
    }

    /// Bootstrap targets `r + γ Q'(s', a_b)` for a batch.
    fn targets(&mut self, batch: &[Transition]) -> Result<Vec<f64>> {
        let n = batch.len();
        let mut next_obs = Array2::zeros((n, OBS_DIM));
        for (i, t) in batch.iter().enumerate() {
            next_obs.row_mut(i).assign(&ArrayView1::from(&t.next_obs));
        }
        let agent_next = self
            .agent
            .target_actor
            .forward_batch(next_obs.view(), None)?;
        let use_teachers =
            self.target_kind() == TargetKind::Behavioral && !self.teachers.is_empty();
        let mut chosen = Array2::zeros((n, OBS_DIM + ACTION_DIM));
        if use_teachers {
            let m = self.teachers.len() + 1;
            let mut all = Array2::zeros((n * m, OBS_DIM + ACTION_DIM));
            for (i, t) in batch.iter().enumerate() {
                let mut props = Vec::with_capacity(m);
                props.push(Proposal {
                    choice: PolicyChoice::Agent,
                    action: [agent_next[[i, 0]], agent_next[[i, 1]]],
                });
                for (j, teacher) in self.teachers.teachers.iter().enumerate() {
                    props.push(Proposal {
                        choice: PolicyChoice::Teacher(j),
                        action: teacher.action(&t.next_state, &mut self.streams.target),
                    });
                }
                let rows = proposal_inputs(&t.next_obs, &props);
                all.slice_mut(ndarray::s![i * m..(i + 1) * m, ..])
                    .assign(&rows);
            }
            let scores = self.proposal_scores(&all)?;
            for i in 0..n {
                let mut best = 0;
                for j in 1..m {
                    if scores[i * m + j] > scores[i * m + best] {
                        best = j;
                    }
                }
                chosen.row_mut(i).assign(&all.row(i * m + best));
            }
        } else {
            for i in 0..n {
                let mut row = chosen.row_mut(i);
                for (j, &v) in batch[i].next_obs.iter().enumerate() {
                    row[j] = v;
                }
                row[OBS_DIM] = agent_next[[i, 0]];
                row[OBS_DIM + 1] = agent_next[[i, 1]];
            }
        }
        let q = self
            .agent
            .target_critic
            .forward_batch(chosen.view(), None)?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let cont = if self.cfg.done_masking && t.done {
                    0.0
                } else {
                    1.0
                };
                behavioral_target(t.reward, self.cfg.critic.gamma * cont, q[[i, 0]])
            })
            .collect())
    }

    /// Online-critic scores used to pick the target proposal.
    fn proposal_scores(&mut self, rows: &Array2<f64>) -> Result<Vec<f64>> {
        let m = self.cfg.target_mean_samples;
        if m == 0 || !self.cfg.method.bayesian() {
            return Ok(self
                .agent
                .critic
                .forward_batch(rows.view(), None)?
                .column(0)
                .to_vec());
        }
        let mut acc = vec![0.0; rows.nrows()];
        for _ in 0..m {
            let masks: MaskBatch = self
                .agent
                .critic
                .sample_masks(rows.nrows(), &mut self.streams.target);
            let q = self.agent.critic.forward_batch(rows.view(), Some(&masks))?;
            for (a, v) in acc.iter_mut().zip(q.column(0)) {
                *a += v / m as f64;
            }
        }
        Ok(acc)
    }

    /// One critic step, one actor step and the soft target updates.
    fn update(&mut self) -> Result<(f64, f64)> {
        let b = self.cfg.schedule.batch_size;
        let batch = self.buffer.sample(b, &mut self.streams.buffer)?;
        let targets = self.targets(&batch)?;
        let mut inputs = Array2::zeros((b, OBS_DIM + ACTION_DIM));
        let mut states = Array2::zeros((b, OBS_DIM));
        for (i, t) in batch.iter().enumerate() {
            let mut row = inputs.row_mut(i);
            for (j, &v) in t.obs.iter().chain(t.action.iter()).enumerate() {
                row[j] = v;
            }
            states.row_mut(i).assign(&ArrayView1::from(&t.obs));
        }
        let (critic_loss, cg) = if self.cfg.method.bayesian() {
            critic_loss_and_grad(
                &self.agent.critic,
                inputs.view(),
                &targets,
                &self.cfg.critic,
                &mut self.streams.dropout,
            )?
        } else {
            point_critic_loss_and_grad(&self.agent.critic, inputs.view(), &targets)?
        };
        self.agent.critic_opt.step(&mut self.agent.critic, &cg)?;
        let k = if self.cfg.method.bayesian() {
            self.cfg.critic.k
        } else {
            1
        };
        let (actor_loss, ag) = actor_loss_and_grad(
            &self.agent.actor,
            &self.agent.critic,
            states.view(),
            k,
            &mut self.streams.dropout,
        )?;
        self.agent.actor_opt.step(&mut self.agent.actor, &ag)?;
        self.agent
            .target_critic
            .soft_update_from(&self.agent.critic, self.cfg.polyak_tau)?;
        self.agent
            .target_actor
            .soft_update_from(&self.agent.actor, self.cfg.polyak_tau)?;
        Ok((critic_loss, actor_loss))
    }

    fn eval_row(&mut self) -> Result<EvalRow> {
        let (mean, std) = evaluate(
            &self.agent.actor,
            self.cfg.schedule.eval_episodes,
            &mut self.streams.eval,
        )?;
        Ok(EvalRow {
            step: self.steps,
            mean,
            std,
        })
    }

    /// Run the whole schedule.
    pub fn run(&mut self) -> Result<RunLog> {
        self.run_with(|_| Ok(()))
    }

    /// Run the whole schedule, handing each log row to `sink` as soon as it
    /// is produced.
    pub fn run_with(
        &mut self,
        mut sink: impl FnMut(LogRecord<'_>) -> Result<()>,
    ) -> Result<RunLog> {
        let sched = self.cfg.schedule;
        let mut log = RunLog::default();
        if sched.eval_every > 0 {
            let row = self.eval_row()?;
            sink(LogRecord::Eval(&row))?;
            log.eval.push(row);
        }
        let n_choices = self.teachers.len() + 1;
        let mut round = 0;
        let mut episode_return = 0.0;
        while self.steps < sched.total_steps {
            round += 1;
            let steps_this_round = sched.steps_per_round.min(sched.total_steps - self.steps);
            let mut counts = vec![0usize; n_choices];
            let mut switches = 0;
            let mut retains = 0;
            let mut finished = Vec::new();
            let mut last_choice: Option<PolicyChoice> = None;
            for _ in 0..steps_this_round {
                let episode_start = self.env.step_index == 0;
                if episode_start {
                    last_choice = None;
                }
                let (choice, retained, reward, done) = self
                    .env_step(&mut log)
                    .map_err(|e| diagnose(e, self.steps, round))?;
                counts[choice.index()] += 1;
                if last_choice.is_some_and(|c| c != choice) {
                    switches += 1;
                }
                last_choice = Some(choice);
                retains += retained as usize;
                episode_return += reward;
                if done {
                    finished.push(episode_return);
                    episode_return = 0.0;
                    last_choice = None;
                }
            }
            let mut closs = 0.0;
            let mut aloss = 0.0;
            let mut n_updates = 0;
            if self.buffer.len() >= sched.batch_size {
                for _ in 0..sched.updates_per_round {
                    let (c, a) = self.update().map_err(|e| diagnose(e, self.steps, round))?;
                    closs += c;
                    aloss += a;
                    n_updates += 1;
                }
            }
            let behavioral_return = if finished.is_empty() {
                episode_return
            } else {
                finished.iter().sum::<f64>() / finished.len() as f64
            };
            let mean = |x: f64| {
                if n_updates > 0 {
                    x / n_updates as f64
                } else {
                    f64::NAN
                }
            };
            let row = TrainRow {
                step: self.steps,
                round,
                mean_critic_loss: mean(closs),
                mean_actor_loss: mean(aloss),
                behavioral_return,
                choice_fractions: counts
                    .iter()
                    .map(|&c| c as f64 / steps_this_round as f64)
                    .collect(),
                switch_count: switches,
                retain_count: retains,
            };
            sink(LogRecord::Train(&row))?;
            log.train.push(row);
            if sched.eval_every > 0 && self.steps.is_multiple_of(sched.eval_every) {
                let row = self.eval_row()?;
                sink(LogRecord::Eval(&row))?;
                log.eval.push(row);
            }
        }
        Ok(log)
    }
}

fn fresh_episode(rng: &mut StreamRng) -> PathFollowingState {
    let mut env = PathFollowing::new(rng);
    env.reset();
    *env.state()
}

fn diagnose(e: Error, step: usize, round: usize) -> Error {
    match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("{msg} (step {step}, round {round})")),
        other => other,
    }
}

/// Train with `cfg` and return the log.
pub fn run_training(cfg: &TrainConfig) -> Result<RunLog> {
    Trainer::new(cfg.clone())?.run()
}

/// Action the behavioral policy would take with a frozen agent, exposed for
/// analysis.
pub fn agent_exploration_action(
    actor: &Mlp,
    obs: &Observation,
    sigma: f64,
    rng: &mut StreamRng,
) -> Result<Action> {
    exploratory_action(actor, obs, sigma, rng)
}
