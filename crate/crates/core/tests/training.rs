mod common;

use acteach::baselines::Method;
use acteach::critic::CriticConfig;
use acteach::envs::path::PathFollowingState;
use acteach::harness::seeds::{self, SeedStreams};
use acteach::teachers::sufficient_action;
use acteach::training::{
    evaluate, evaluate_policy, run_training, ReplayBuffer, TrainConfig, TrainSchedule, Trainer,
    Transition,
};
use common::rng;
use proptest::prelude::*;

/// A cheap configuration for loop-level checks.
fn small(method: Method, teachers: &str, seed: u64, total_steps: usize) -> TrainConfig {
    TrainConfig {
        method,
        teachers: teachers.into(),
        seed,
        hidden: vec![16, 16],
        critic: CriticConfig {
            k: 4,
            ..CriticConfig::default()
        },
        schedule: TrainSchedule {
            steps_per_round: 100,
            updates_per_round: 10,
            total_steps,
            batch_size: 32,
            eval_every: 200,
            eval_episodes: 2,
        },
        ..TrainConfig::default()
    }
}

fn transition(i: usize) -> Transition {
    let s = PathFollowingState::start([0, 1, 2, 3]);
    Transition {
        obs: [i as f64, 0.0, 0.0, 0.0, 0.0],
        action: [0.0, 0.0],
        reward: 0.0,
        next_obs: s.observation(),
        done: false,
        next_state: s,
    }
}

#[test]
fn replay_overwrites_oldest() {
    let mut b = ReplayBuffer::new(3).unwrap();
    for i in 0..5 {
        b.insert(transition(i));
    }
    assert_eq!(b.len(), 3);
    assert_eq!(b.inserted(), 5);
    let firsts: Vec<f64> = (0..3).map(|i| b.get(i).unwrap().obs[0]).collect();
    assert_eq!(firsts, vec![3.0, 4.0, 2.0]);
    assert!(ReplayBuffer::new(0).is_err());
}

#[test]
fn replay_sampling() {
    let mut one = ReplayBuffer::new(10).unwrap();
    assert!(one.sample(4, &mut rng(0)).is_err());
    one.insert(transition(7));
    let batch = one.sample(128, &mut rng(1)).unwrap();
    assert_eq!(batch.len(), 128);
    assert!(batch.iter().all(|t| *t == transition(7)));

    let mut b = ReplayBuffer::new(100).unwrap();
    for i in 0..100 {
        b.insert(transition(i));
    }
    let mut counts = [0usize; 100];
    let mut r = rng(2);
    let draws = 100_000;
    for i in b.sample_indices(draws, &mut r).unwrap() {
        counts[i] += 1;
    }
    for c in counts {
        assert!((c as f64 / draws as f64 - 0.01).abs() < 0.0015);
    }
}

#[test]
fn evaluation_examples() {
    let cfg = TrainConfig {
        final_layer_init: 0.0,
        ..TrainConfig::default()
    };
    let mut zero = acteach::training::Agent::new(&cfg, &mut rng(0), &mut rng(1))
        .unwrap()
        .actor;
    for w in zero.weights_mut() {
        w.fill(0.0);
    }
    assert_eq!(evaluate(&zero, 5, &mut rng(2)).unwrap(), (0.0, 0.0));
    let scripted = evaluate_policy(|_, s| Ok(sufficient_action(s)), 5, &mut rng(3)).unwrap();
    assert_eq!(scripted, (4.0, 0.0));
    assert!(evaluate(&zero, 0, &mut rng(4)).is_err());
}

#[test]
fn schedule_arithmetic() {
    let mut cfg = small(Method::AcTeach, "set_A", 0, 400);
    cfg.schedule.steps_per_round = 200;
    cfg.schedule.updates_per_round = 100;
    cfg.schedule.batch_size = 128;
    let mut t = Trainer::new(cfg).unwrap();
    let log = t.run().unwrap();
    assert_eq!(log.train.len(), 2);
    assert_eq!(t.buffer().len(), 400);
    assert_eq!(t.steps(), 400);
    assert_eq!(log.choices.len(), 400);
    assert!(log
        .train
        .iter()
        .all(|r| r.mean_critic_loss.is_finite() && r.mean_actor_loss.is_finite()));
    assert_eq!(
        log.train.iter().map(|r| r.step).collect::<Vec<_>>(),
        vec![200, 400]
    );
    for row in &log.train {
        assert!((row.choice_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(row.choice_fractions.len(), 4);
    }
}

#[test]
fn same_seed_same_log() {
    let cfg = small(Method::AcTeach, "set_A", 3, 400);
    assert_eq!(run_training(&cfg).unwrap(), run_training(&cfg).unwrap());
    let other = small(Method::AcTeach, "set_A", 4, 400);
    assert_ne!(
        run_training(&cfg).unwrap().actions,
        run_training(&other).unwrap().actions
    );
}

#[test]
fn evaluation_does_not_disturb_training() {
    let with_eval = small(Method::AcTeach, "set_B", 5, 600);
    let mut without = with_eval.clone();
    without.schedule.eval_every = 0;
    let a = run_training(&with_eval).unwrap();
    let b = run_training(&without).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.actions, b.actions);
    assert_eq!(a.eval.len(), 4);
    assert!(b.eval.is_empty());
}

#[test]
fn no_updates_means_no_learning() {
    let mut cfg = small(Method::AcTeach, "set_A", 6, 600);
    cfg.schedule.updates_per_round = 0;
    let mut t = Trainer::new(cfg.clone()).unwrap();
    let log = t.run().unwrap();
    let mut eval_rng = SeedStreams::new(cfg.seed).stream(seeds::EVAL);
    for row in &log.eval {
        let (mean, std) =
            evaluate(&t.agent().actor, cfg.schedule.eval_episodes, &mut eval_rng).unwrap();
        assert_eq!((row.mean, row.std), (mean, std));
    }
    assert!(log.train.iter().all(|r| r.mean_critic_loss.is_nan()));
}

#[test]
fn bddpg_ignores_teachers() {
    let log = run_training(&small(Method::Bddpg, "set_G", 7, 200)).unwrap();
    assert!(log.choices.iter().all(|&c| c == 0));
    assert!(log
        .train
        .iter()
        .all(|r| r.choice_fractions == vec![1.0] && r.switch_count == 0));
}

#[test]
fn every_method_runs() {
    for m in Method::ALL {
        let log = run_training(&small(m, "set_A", 8, 200)).unwrap();
        assert_eq!(log.actions.len(), 200, "{m}");
        assert!(log
            .actions
            .iter()
            .all(|a| a.iter().all(|v| v.abs() <= 0.045)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_step_is_stored_once(total in 1usize..300, per_round in 1usize..120, seed in any::<u64>()) {
        let mut cfg = small(Method::AcTeach, "set_A", seed, total);
        cfg.schedule.steps_per_round = per_round;
        cfg.schedule.updates_per_round = 1;
        cfg.schedule.eval_every = 0;
        let mut t = Trainer::new(cfg).unwrap();
        let log = t.run().unwrap();
        prop_assert_eq!(t.buffer().inserted(), total as u64);
        prop_assert_eq!(log.choices.len(), total);
        prop_assert_eq!(log.train.len(), total.div_ceil(per_round));
        prop_assert_eq!(log.train.last().unwrap().step, total);
    }
}
