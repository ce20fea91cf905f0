//! Comparison behavioral policies. They share the training loop and differ
//! only in how the executed proposal is chosen and how the critic is fit.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;

use crate::envs::path::{Observation, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Init, Mlp};
use crate::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Thompson selection with commitment over agent and teachers.
    AcTeach,
    /// Agent with exploration noise only; teachers are ignored.
    Bddpg,
    /// Argmax of a dropout-free critic trained on squared Bellman error.
    CriticPoint,
    /// Uniform choice among agent and teachers.
    Random,
    /// ε-greedy DQN over agent and teachers.
    Dqn,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::AcTeach,
        Method::Bddpg,
        Method::CriticPoint,
        Method::Random,
        Method::Dqn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::AcTeach => "acteach",
            Method::Bddpg => "bddpg",
            Method::CriticPoint => "critic_point",
            Method::Random => "random",
            Method::Dqn => "dqn",
        }
    }

    /// Whether the critic is the Bayesian dropout critic.
    pub fn bayesian(self) -> bool {
        !matches!(self, Method::CriticPoint)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidValue {
                key: "method".into(),
                value: s.into(),
                reason: "expected acteach, bddpg, critic_point, random or dqn".into(),
            })
    }
}

/// Uniform choice among `n_proposals` indices.
pub fn random_select<R: Rng + ?Sized>(n_proposals: usize, rng: &mut R) -> usize {
    if n_proposals <= 1 {
        return 0;
    }
    rng.random_range(0..n_proposals)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqnConfig {
    pub lr: f64,
    pub gamma: f64,
    pub eps_initial: f64,
    pub eps_final: f64,
    pub exploration_steps: u64,
    pub buffer_size: usize,
    pub train_freq: u64,
    pub target_update_freq: u64,
    pub batch_size: usize,
    pub hidden: [usize; 2],
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            lr: 5e-4,
            gamma: 0.99,
            eps_initial: 1.0,
            eps_final: 0.02,
            exploration_steps: 100_000,
            buffer_size: 100_000,
            train_freq: 10,
            target_update_freq: 1000,
            batch_size: 32,
            hidden: [64, 64],
        }
    }
}

/// Linearly annealed exploration rate.
pub fn epsilon_at(cfg: &DqnConfig, t: u64) -> f64 {
    if cfg.exploration_steps == 0 {
        return cfg.eps_final;
    }
    let frac = (t as f64 / cfg.exploration_steps as f64).min(1.0);
    cfg.eps_initial + frac * (cfg.eps_final - cfg.eps_initial)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ChoiceTransition {
    obs: Observation,
    choice: usize,
    reward: f64,
    next_obs: Observation,
    done: bool,
}

/// DQN over the discrete set {agent, teacher 1, …, teacher N}.
#[derive(Debug, Clone)]
pub struct DqnSelector {
    cfg: DqnConfig,
    net: Mlp,
    target: Mlp,
    opt: Adam,
    replay: Vec<ChoiceTransition>,
    next_slot: usize,
    updates: u64,
    done_masking: bool,
}

impl DqnSelector {
    pub fn new<R: Rng + ?Sized>(
        n_choices: usize,
        cfg: DqnConfig,
        done_masking: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if n_choices == 0 {
            return Err(Error::InvalidConfig(
                "DQN selector needs at least one choice".into(),
            ));
        }
        if cfg.batch_size == 0
            || cfg.buffer_size == 0
            || cfg.train_freq == 0
            || cfg.target_update_freq == 0
        {
            return Err(Error::InvalidConfig(
                "DQN sizes and frequencies must be positive".into(),
            ));
        }
        let sizes = [OBS_DIM, cfg.hidden[0], cfg.hidden[1], n_choices];
        let net = Mlp::new(
            &sizes,
            Activation::Relu,
            Activation::Identity,
            1.0,
            Init::FanIn { final_layer: None },
            rng,
        )?;
        let target = net.clone();
        let opt = Adam::new(&net, cfg.lr);
        Ok(DqnSelector {
            cfg,
            net,
            target,
            opt,
            replay: Vec::new(),
            next_slot: 0,
            updates: 0,
            done_masking,
        })
    }

    pub fn n_choices(&self) -> usize {
        self.net.output_dim()
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    /// ε-greedy choice at global step `t`.
    pub fn select<R: Rng + ?Sized>(&self, obs: &Observation, t: u64, rng: &mut R) -> Result<usize> {
        let eps = epsilon_at(&self.cfg, t);
        if rng.random::<f64>() < eps {
            return Ok(random_select(self.n_choices(), rng));
        }
        let q = self.net.forward(obs, None)?;
        let mut best = 0;
        for (i, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn record(
        &mut self,
        obs: Observation,
        choice: usize,
        reward: f64,
        next_obs: Observation,
        done: bool,
    ) {
        let t = ChoiceTransition {
            obs,
            choice,
            reward,
            next_obs,
            done,
        };
        if self.replay.len() < self.cfg.buffer_size {
            self.replay.push(t);
        } else {
            self.replay[self.next_slot] = t;
        }
        self.next_slot = (self.next_slot + 1) % self.cfg.buffer_size;
    }

    /// Train when `t` hits the training frequency; returns the loss when an
    /// update happened.
    pub fn maybe_train(&mut self, t: u64, rng: &mut StreamRng) -> Result<Option<f64>> {
        if t == 0
            || !t.is_multiple_of(self.cfg.train_freq)
            || self.replay.len() < self.cfg.batch_size
        {
            return Ok(None);
        }
        let b = self.cfg.batch_size;
        let idx: Vec<usize> = (0..b)
            .map(|_| rng.random_range(0..self.replay.len()))
            .collect();
        let mut obs = Array2::zeros((b, OBS_DIM));
        let mut next = Array2::zeros((b, OBS_DIM));
        for (row, &i) in idx.iter().enumerate() {
            let t = &self.replay[i];
            obs.row_mut(row).assign(&ndarray::ArrayView1::from(&t.obs));
            next.row_mut(row)
                .assign(&ndarray::ArrayView1::from(&t.next_obs));
        }
        let q_next = self.target.forward_batch(next.view(), None)?;
        let trace = self.net.forward_trace(obs.view(), None)?;
        let mut grad = Array2::zeros(trace.output.dim());
        let mut loss = 0.0;
        for (row, &i) in idx.iter().enumerate() {
            let t = &self.replay[i];
            let best_next = q_next
                .row(row)
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let cont = if self.done_masking && t.done {
                0.0
            } else {
                1.0
            };
            let y = t.reward + self.cfg.gamma * cont * best_next;
            let d = trace.output[[row, t.choice]] - y;
            loss += d * d;
            grad[[row, t.choice]] = 2.0 * d / b as f64;
        }
        let (g, _) = self.net.backward(&trace, grad.view())?;
        self.opt.step(&mut self.net, &g)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.cfg.target_update_freq) {
            self.target.copy_from(&self.net)?;
        }
        Ok(Some(loss / b as f64))
    }
}
