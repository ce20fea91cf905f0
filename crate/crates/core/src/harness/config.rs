//! Flat `key = value` experiment configuration.
//!
//! Keys use underscores; command-line overrides may spell them with hyphens.
//! Booleans are `true`/`false`, lists are comma-separated.

use std::path::PathBuf;
use std::str::FromStr;

use crate::baselines::Method;
use crate::error::{Error, Result};
use crate::training::{TargetKind, TrainConfig};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "ACTEACH_OUT";

/// Ablation switches that expand into ordinary keys.
pub const FLAG_ALIASES: [(&str, &str, &str); 4] = [
    ("no_commitment", "beta", "0"),
    ("no_behavioral_target", "target", "agent"),
    ("point_critic", "method", "critic_point"),
    ("random_selection", "method", "random"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    /// Overrides in the order they were applied, as given.
    pub overrides: Vec<(String, String)>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let out_dir = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        ExperimentConfig {
            train: TrainConfig::default(),
            out_dir,
            overrides: Vec::new(),
        }
    }
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| Error::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

fn parse_target(key: &str, value: &str) -> Result<TargetKind> {
    match value.trim() {
        "behavioral" => Ok(TargetKind::Behavioral),
        "agent" => Ok(TargetKind::Agent),
        _ => Err(Error::InvalidValue {
            key: key.into(),
            value: value.into(),
            reason: "expected behavioral or agent".into(),
        }),
    }
}

impl ExperimentConfig {
    /// Every key accepted by [`ExperimentConfig::set`].
    pub fn keys() -> Vec<String> {
        ExperimentConfig::default()
            .entries()
            .into_iter()
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_flag(key: &str) -> bool {
        let key = normalize(key);
        FLAG_ALIASES.iter().any(|(f, _, _)| *f == key)
            || matches!(
                key.as_str(),
                "reset_on_agree" | "done_masking" | "point_commitment" | "greedy_selection"
            )
    }

    /// Apply one override and record it.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        self.set(key, value)?;
        self.overrides
            .push((normalize(key), value.trim().to_string()));
        Ok(())
    }

    /// Set one key without recording it as an override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize(key);
        let k = key.as_str();
        if let Some((_, target, v)) = FLAG_ALIASES.iter().find(|(f, _, _)| *f == k) {
            if parse::<bool>(k, value)? {
                self.set(target, v)?;
            }
            return Ok(());
        }
        let t = &mut self.train;
        match k {
            "method" => t.method = parse::<Method>(k, value)?,
            "teachers" => t.teachers = value.trim().to_string(),
            "teacher_noise" => t.teacher_noise = parse(k, value)?,
            "seed" => t.seed = parse(k, value)?,
            "beta" => t.behavior.beta = parse(k, value)?,
            "psi" => t.behavior.psi = parse(k, value)?,
            "k" => {
                t.critic.k = parse(k, value)?;
                t.behavior.k = t.critic.k;
            }
            "tau" => {
                t.critic.tau = parse(k, value)?;
                t.behavior.tau = t.critic.tau;
            }
            "alpha" => t.critic.alpha = parse(k, value)?,
            "keep_prob" => t.critic.keep_prob = parse(k, value)?,
            "gamma" => {
                t.critic.gamma = parse(k, value)?;
                t.dqn.gamma = t.critic.gamma;
            }
            "weight_decay" => t.critic.weight_decay = parse(k, value)?,
            "exploration_sigma" => t.behavior.exploration_sigma = parse(k, value)?,
            "greedy_selection" => t.behavior.greedy_selection = parse(k, value)?,
            "reset_on_agree" => t.behavior.reset_on_agree = parse(k, value)?,
            "target" => t.target = parse_target(k, value)?,
            "target_mean_samples" => t.target_mean_samples = parse(k, value)?,
            "done_masking" => t.done_masking = parse(k, value)?,
            "point_commitment" => t.point_commitment = parse(k, value)?,
            "steps_per_round" => t.schedule.steps_per_round = parse(k, value)?,
            "updates_per_round" => t.schedule.updates_per_round = parse(k, value)?,
            "total_steps" => t.schedule.total_steps = parse(k, value)?,
            "batch_size" => t.schedule.batch_size = parse(k, value)?,
            "eval_every" => t.schedule.eval_every = parse(k, value)?,
            "eval_episodes" => t.schedule.eval_episodes = parse(k, value)?,
            "actor_lr" => t.actor_lr = parse(k, value)?,
            "critic_lr" => t.critic_lr = parse(k, value)?,
            "polyak_tau" => t.polyak_tau = parse(k, value)?,
            "hidden" => t.hidden = parse_list(k, value)?,
            "final_layer_init" => t.final_layer_init = parse(k, value)?,
            "replay_capacity" => t.replay_capacity = parse(k, value)?,
            "dqn_lr" => t.dqn.lr = parse(k, value)?,
            "dqn_eps_initial" => t.dqn.eps_initial = parse(k, value)?,
            "dqn_eps_final" => t.dqn.eps_final = parse(k, value)?,
            "dqn_exploration_steps" => t.dqn.exploration_steps = parse(k, value)?,
            "dqn_buffer_size" => t.dqn.buffer_size = parse(k, value)?,
            "dqn_train_freq" => t.dqn.train_freq = parse(k, value)?,
            "dqn_target_update_freq" => t.dqn.target_update_freq = parse(k, value)?,
            "dqn_batch_size" => t.dqn.batch_size = parse(k, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            _ => return Err(Error::UnknownKey(key)),
        }
        Ok(())
    }

    /// All effective settings, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let t = &self.train;
        let hidden: Vec<String> = t.hidden.iter().map(|h| h.to_string()).collect();
        let e: Vec<(&str, String)> = vec![
            ("method", t.method.to_string()),
            ("teachers", t.teachers.clone()),
            ("teacher_noise", t.teacher_noise.to_string()),
            ("seed", t.seed.to_string()),
            ("beta", t.behavior.beta.to_string()),
            ("psi", t.behavior.psi.to_string()),
            ("k", t.critic.k.to_string()),
            ("tau", t.critic.tau.to_string()),
            ("alpha", t.critic.alpha.to_string()),
            ("keep_prob", t.critic.keep_prob.to_string()),
            ("gamma", t.critic.gamma.to_string()),
            ("weight_decay", t.critic.weight_decay.to_string()),
            (
                "exploration_sigma",
                t.behavior.exploration_sigma.to_string(),
            ),
            ("greedy_selection", t.behavior.greedy_selection.to_string()),
            ("reset_on_agree", t.behavior.reset_on_agree.to_string()),
            ("target", t.target.name().to_string()),
            ("target_mean_samples", t.target_mean_samples.to_string()),
            ("done_masking", t.done_masking.to_string()),
            ("point_commitment", t.point_commitment.to_string()),
            ("steps_per_round", t.schedule.steps_per_round.to_string()),
            (
                "updates_per_round",
                t.schedule.updates_per_round.to_string(),
            ),
            ("total_steps", t.schedule.total_steps.to_string()),
            ("batch_size", t.schedule.batch_size.to_string()),
            ("eval_every", t.schedule.eval_every.to_string()),
            ("eval_episodes", t.schedule.eval_episodes.to_string()),
            ("actor_lr", t.actor_lr.to_string()),
            ("critic_lr", t.critic_lr.to_string()),
            ("polyak_tau", t.polyak_tau.to_string()),
            ("hidden", hidden.join(",")),
            ("final_layer_init", t.final_layer_init.to_string()),
            ("replay_capacity", t.replay_capacity.to_string()),
            ("dqn_lr", t.dqn.lr.to_string()),
            ("dqn_eps_initial", t.dqn.eps_initial.to_string()),
            ("dqn_eps_final", t.dqn.eps_final.to_string()),
            ("dqn_exploration_steps", t.dqn.exploration_steps.to_string()),
            ("dqn_buffer_size", t.dqn.buffer_size.to_string()),
            ("dqn_train_freq", t.dqn.train_freq.to_string()),
            (
                "dqn_target_update_freq",
                t.dqn.target_update_freq.to_string(),
            ),
            ("dqn_batch_size", t.dqn.batch_size.to_string()),
        ];
        e.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Parse a `key = value` file body on top of the defaults. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn parse_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.apply(k, v)?;
        }
        Ok(())
    }

    /// Apply `--key value` / bare `--flag` arguments.
    pub fn apply_args(&mut self, args: &[String]) -> Result<()> {
        let mut i = 0;
        while i < args.len() {
            let a = &args[i];
            let key = a.strip_prefix("--").ok_or_else(|| Error::InvalidValue {
                key: a.clone(),
                value: String::new(),
                reason: "expected `--key value`".into(),
            })?;
            if let Some((k, v)) = key.split_once('=') {
                self.apply(k, v)?;
                i += 1;
                continue;
            }
            let next = args.get(i + 1).filter(|n| !n.starts_with("--"));
            match next {
                Some(v) => {
                    self.apply(key, v)?;
                    i += 2;
                }
                None if Self::is_flag(key) => {
                    self.apply(key, "true")?;
                    i += 1;
                }
                None => {
                    // Surface unknown keys before missing values.
                    self.set(key, "")?;
                    return Err(Error::InvalidValue {
                        key: normalize(key),
                        value: String::new(),
                        reason: "missing value".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// File name stem for one run.
    pub fn run_name(&self) -> String {
        let t = &self.train;
        let mut name = format!("{}_{}", t.method, t.teachers);
        for (k, v) in &self.overrides {
            if matches!(k.as_str(), "method" | "teachers" | "seed" | "out_dir") {
                continue;
            }
            name.push_str(&format!("_{k}={v}"));
        }
        name.push_str(&format!("_seed{}", t.seed));
        name.replace(['/', ' '], "-")
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()
    }
}
