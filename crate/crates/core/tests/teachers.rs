mod common;

use acteach::envs::path::{
    distance, step_state, Action, PathFollowingState, CORNERS, GOAL_RADIUS, MAX_STEP,
};
use acteach::teachers::{
    adversarial_action, corner_action, endpoint_action, midpoint_action, random_action,
    sufficient_action, Teacher, TeacherKind, TeacherSet, DEFAULT_NOISE_SIGMA,
};
use common::rng;
use proptest::prelude::*;
use rand::Rng;

fn at(position: [f64; 2], goal_order: [usize; 4]) -> PathFollowingState {
    let mut s = PathFollowingState::start(goal_order);
    s.position = position;
    s
}

fn close(a: Action, b: Action) -> bool {
    (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12
}

/// Total reward of one episode driven by `policy`.
fn rollout(goal_order: [usize; 4], mut policy: impl FnMut(&PathFollowingState) -> Action) -> f64 {
    let mut s = PathFollowingState::start(goal_order);
    let mut total = 0.0;
    while !s.is_done() {
        let a = policy(&s);
        total += step_state(&mut s, a).unwrap().reward;
    }
    total
}

fn random_order<R: Rng>(r: &mut R) -> [usize; 4] {
    let mut o = [0, 1, 2, 3];
    for i in (1..4).rev() {
        o.swap(i, r.random_range(0..=i));
    }
    o
}

#[test]
fn corner_teacher_examples() {
    let s = at([0.0, 0.0], [3, 0, 1, 2]);
    assert!(close(corner_action(3, &s), [0.045, 0.045]));
    let s = at([0.24, 0.25], [3, 0, 1, 2]);
    assert!(close(corner_action(3, &s), [0.01, 0.0]));
    let s = at(CORNERS[1], [3, 0, 1, 2]);
    assert_eq!(corner_action(1, &s), [0.0, 0.0]);
}

#[test]
fn corner_teacher_converges_in_six_steps() {
    for i in 0..4 {
        let mut s = at([0.0, 0.0], [(i + 1) % 4, (i + 2) % 4, (i + 3) % 4, i]);
        let mut steps = 0;
        while distance(s.position, CORNERS[i]) >= GOAL_RADIUS {
            let a = corner_action(i, &s);
            step_state(&mut s, a).unwrap();
            steps += 1;
        }
        assert!(steps <= 6, "corner {i}: {steps}");
    }
}

#[test]
fn sufficient_teacher_delegates_to_current_goal() {
    let mut s = at([0.0, 0.0], [3, 0, 1, 2]);
    assert_eq!(sufficient_action(&s), corner_action(3, &s));
    s.goal_index = 1;
    assert_eq!(sufficient_action(&s), corner_action(0, &s));
}

#[test]
fn sufficient_teacher_collects_every_corner() {
    let mut r = rng(1);
    for _ in 0..24 {
        assert_eq!(rollout(random_order(&mut r), sufficient_action), 4.0);
    }
}

#[test]
fn adversarial_teacher_examples() {
    let s = at([0.0, 0.0], [3, 0, 1, 2]);
    assert!(close(adversarial_action(&s), [-0.045, -0.045]));
    let mut near = at([0.2, 0.21], [3, 0, 1, 2]);
    let before = distance(near.position, CORNERS[3]);
    let a = adversarial_action(&near);
    step_state(&mut near, a).unwrap();
    assert!(distance(near.position, CORNERS[3]) > before);
    let mut r = rng(2);
    for _ in 0..24 {
        assert_eq!(rollout(random_order(&mut r), adversarial_action), 0.0);
    }
}

#[test]
fn midpoint_and_endpoint_examples() {
    let s = at([0.125, 0.125], [3, 0, 1, 2]);
    assert_eq!(midpoint_action(&s), [0.0, 0.0]);
    let s = at([0.2, 0.2], [3, 0, 1, 2]);
    assert_eq!(endpoint_action(&s), corner_action(3, &s));
    let s = at([0.05, 0.05], [3, 0, 1, 2]);
    assert!(close(endpoint_action(&s), [-0.045, -0.045]));
    let tie = at([0.125, 0.125], [3, 0, 1, 2]);
    assert_eq!(endpoint_action(&tie), corner_action(3, &tie));
}

#[test]
fn alternating_endpoint_and_midpoint_stalls() {
    for start in [[0.11, 0.11], [0.125, 0.125], [0.14, 0.13]] {
        let mut s = at(start, [3, 0, 1, 2]);
        let initial = distance(s.position, s.current_goal());
        for t in 0..20 {
            let a = if t % 2 == 0 {
                endpoint_action(&s)
            } else {
                midpoint_action(&s)
            };
            step_state(&mut s, a).unwrap();
        }
        assert_eq!(s.goal_index, 0);
        assert!(
            distance(s.position, s.current_goal()) >= initial - 0.01,
            "{start:?}"
        );
    }
}

#[test]
fn random_teacher_bounds_and_mean() {
    let mut r = rng(3);
    let n = 10_000;
    let mut sum = [0.0; 2];
    for _ in 0..n {
        let a = random_action(&mut r);
        assert!(a.iter().all(|v| v.abs() <= MAX_STEP));
        sum[0] += a[0];
        sum[1] += a[1];
    }
    assert!((sum[0] / n as f64).abs() < 0.002);
    assert!((sum[1] / n as f64).abs() < 0.002);
    let s = at([0.0, 0.0], [0, 1, 2, 3]);
    let t = Teacher::new(TeacherKind::Random);
    assert_eq!(t.action(&s, &mut rng(4)), t.action(&s, &mut rng(4)));
}

#[test]
fn zero_noise_reproduces_inner_policy() {
    let s = at([0.1, -0.2], [2, 0, 1, 3]);
    let t = Teacher::noisy(TeacherKind::Sufficient, 0.0);
    assert_eq!(t.action(&s, &mut rng(5)), sufficient_action(&s));
}

#[test]
fn noisy_sufficient_teacher_is_suboptimal() {
    let t = Teacher::noisy(TeacherKind::Sufficient, DEFAULT_NOISE_SIGMA);
    let mut r = rng(6);
    let mut total = 0.0;
    let episodes = 100;
    for _ in 0..episodes {
        let order = random_order(&mut r);
        let mut s = PathFollowingState::start(order);
        while !s.is_done() {
            let a = t.action(&s, &mut r);
            assert!(a.iter().all(|v| v.abs() <= MAX_STEP));
            total += step_state(&mut s, a).unwrap().reward;
        }
    }
    let mean = total / episodes as f64;
    assert!(mean > 0.0 && mean < 4.0, "{mean}");
}

#[test]
fn set_cardinalities() {
    let expected = [
        ("set_A", 3),
        ("set_B", 2),
        ("set_C", 1),
        ("set_D", 2),
        ("set_E", 5),
        ("set_F", 6),
        ("set_G", 8),
        ("set_H", 2),
        ("four_partial_noisy", 4),
        ("single_sufficient_noisy", 1),
        ("insufficient_one_corner", 1),
        ("none", 0),
    ];
    for (name, n) in expected {
        let set = TeacherSet::by_name(name, DEFAULT_NOISE_SIGMA).unwrap();
        assert_eq!(set.len(), n, "{name}");
    }
    let g = TeacherSet::by_name("set_G", 0.3).unwrap();
    assert_eq!(
        g.teachers
            .iter()
            .filter(|t| t.kind == TeacherKind::Random)
            .count(),
        4
    );
    let d = TeacherSet::by_name("set_D", 0.3).unwrap();
    assert_eq!(d.teachers[0].kind, TeacherKind::Midpoint);
    assert_eq!(d.teachers[1].kind, TeacherKind::Endpoint);
    assert!(TeacherSet::by_name("set_Z", 0.3).is_err());
}

#[test]
fn oracle_selector_over_corner_teachers() {
    let set = TeacherSet::by_name("four_partial", 0.0).unwrap();
    let mut r = rng(7);
    for _ in 0..24 {
        let order = random_order(&mut r);
        let ret = rollout(order, |s| {
            let goal = s.goal_order[s.goal_index.min(3)];
            set.teachers[goal].base_action(s, &mut rng(0))
        });
        assert_eq!(ret, 4.0);
        for i in 0..4 {
            assert!(rollout(order, |s| corner_action(i, s)) <= 1.0);
        }
    }
}

fn any_state() -> impl Strategy<Value = PathFollowingState> {
    (-0.5f64..0.5, -0.5f64..0.5, 0usize..24, 0usize..4).prop_map(|(x, y, perm, gi)| {
        let mut order = [0, 1, 2, 3];
        let mut p = perm;
        for i in (1..4).rev() {
            order.swap(i, p % (i + 1));
            p /= i + 1;
        }
        let mut s = at([x, y], order);
        s.goal_index = gi;
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn outputs_stay_in_the_action_box(s in any_state(), seed in any::<u64>(), sigma in 0.0f64..1.0) {
        let kinds = [
            TeacherKind::Corner(0), TeacherKind::Corner(3), TeacherKind::Sufficient, TeacherKind::Adversarial,
            TeacherKind::Midpoint, TeacherKind::Endpoint, TeacherKind::Random,
        ];
        let mut r = rng(seed);
        for kind in kinds {
            let a = Teacher::noisy(kind, sigma).action(&s, &mut r);
            prop_assert!(a.iter().all(|v| v.abs() <= MAX_STEP));
        }
    }

    #[test]
    fn corner_step_never_overshoots(s in any_state(), i in 0usize..4) {
        let a = corner_action(i, &s);
        let c = CORNERS[i];
        for axis in 0..2 {
            let gap = c[axis] - s.position[axis];
            prop_assert!(a[axis].abs() <= gap.abs() + 1e-15);
            prop_assert!(a[axis] * gap >= 0.0);
        }
        prop_assert_eq!(corner_action(i, &at(c, s.goal_order)), [0.0, 0.0]);
    }
}
