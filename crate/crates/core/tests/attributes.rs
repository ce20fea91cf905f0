mod common;

use acteach::attributes::fixtures::{
    adversarial_pair, alternating_pair, corner_cell, line, opposing_pair, partial_only,
    random_deterministic, random_stochastic, PathGrid, PathSegment,
};
use acteach::attributes::{
    is_contradictory, is_partial, is_set_sufficient, is_sufficient, optimal_value, policy_value,
    reach_decomposition, reach_times, value_iteration, verify_proposition,
};
use acteach::envs::tabular::{Dynamics, TabularMdp, TabularPolicy};
use common::{reach_oracle, rng};
use proptest::prelude::*;

#[test]
fn value_examples() {
    let mdp = TabularMdp::new(
        1,
        1,
        0.99,
        &[0],
        vec![1.0],
        Dynamics::Deterministic(vec![0]),
    )
    .unwrap();
    let v = policy_value(&mdp, &TabularPolicy::Deterministic(vec![0])).unwrap();
    assert!((v.get(0) - 100.0).abs() < 1e-8);

    let stuck = line(3, 0.9);
    let v = policy_value(&stuck, &TabularPolicy::Deterministic(vec![1, 1, 0])).unwrap();
    assert_eq!(v.get(0), 0.0);

    let chain = line(2, 0.9);
    let v = policy_value(&chain, &TabularPolicy::Deterministic(vec![0, 0])).unwrap();
    let oracle: f64 = (1..10_000).map(|t| 0.9f64.powi(t)).sum();
    assert!((v.get(0) - 9.0).abs() < 1e-8);
    assert!((v.get(0) - oracle).abs() < 1e-8);
}

#[test]
fn value_iteration_residuals_shrink_geometrically() {
    let mut r = rng(1);
    for _ in 0..20 {
        let (mdp, _) = random_stochastic(&mut r, 8, 3);
        let v = value_iteration(&mdp);
        for w in v.residuals.windows(2) {
            assert!(w[1] <= mdp.gamma() * w[0] + 1e-12);
        }
        assert!(v
            .values
            .iter()
            .all(|&x| (-1e-9..=1.0 / (1.0 - mdp.gamma()) + 1e-9).contains(&x)));
    }
}

#[test]
fn reach_time_examples() {
    let mdp = line(3, 0.9);
    let t = reach_times(&mdp, &TabularPolicy::Deterministic(vec![0, 0, 0])).unwrap();
    assert_eq!(t, vec![Some(2), Some(1), Some(0)]);
    let t = reach_times(&mdp, &TabularPolicy::Deterministic(vec![1, 0, 0])).unwrap();
    assert_eq!(t[0], None);
    let mut r = rng(2);
    let (stochastic, policy) = random_stochastic(&mut r, 4, 2);
    assert!(reach_times(&stochastic, &policy).is_err());
}

#[test]
fn proposition_holds_on_random_deterministic_mdps() {
    let mut r = rng(3);
    for i in 0..200 {
        let (mdp, policy) = random_deterministic(&mut r, 12, 3);
        assert_eq!(
            verify_proposition(&mdp, &policy).unwrap(),
            None,
            "instance {i}"
        );
    }
    let single =
        TabularMdp::new(1, 1, 0.9, &[0], vec![1.0], Dynamics::Deterministic(vec![0])).unwrap();
    assert_eq!(
        verify_proposition(&single, &TabularPolicy::Deterministic(vec![0])).unwrap(),
        None
    );
    let chain = line(6, 0.9);
    assert_eq!(
        verify_proposition(&chain, &TabularPolicy::Deterministic(vec![0; 6])).unwrap(),
        None
    );
}

#[test]
fn stochastic_value_decomposes_into_reliability_and_speed() {
    let mut r = rng(4);
    for i in 0..50 {
        let (mdp, policy) = random_stochastic(&mut r, 6, 3);
        let v = policy_value(&mdp, &policy).unwrap();
        let (p_reach, discounted) = reach_oracle(&mdp, &policy);
        for s in 0..mdp.n_states() {
            let d = reach_decomposition(&mdp, &policy, s, 1e-12).unwrap();
            assert!(
                (d.p_reach - p_reach[s]).abs() < 1e-6,
                "instance {i} state {s}: {} vs {}",
                d.p_reach,
                p_reach[s]
            );
            let worth = discounted[s] / (1.0 - mdp.gamma());
            assert!((d.value() - worth).abs() < 1e-6, "instance {i} state {s}");
            assert!(
                (v.get(s) - d.value()).abs() < 1e-6,
                "instance {i} state {s}"
            );
        }
    }
}

#[test]
fn partial_only_fixture() {
    let (mdp, t) = partial_only();
    let c = is_partial(&mdp, &t).unwrap();
    assert!(c.holds);
    assert_eq!(c.witness, vec![0, 1]);
    assert!(!is_sufficient(&mdp, &t).unwrap());
}

/// Every per-state choice between the two teachers, as deterministic policies.
fn mixtures(a: &TabularPolicy, b: &TabularPolicy, n: usize) -> Vec<TabularPolicy> {
    let (TabularPolicy::Deterministic(a), TabularPolicy::Deterministic(b)) = (a, b) else {
        panic!("deterministic teachers expected");
    };
    (0..1usize << n)
        .map(|bits| {
            TabularPolicy::Deterministic(
                (0..n)
                    .map(|s| if bits >> s & 1 == 1 { b[s] } else { a[s] })
                    .collect(),
            )
        })
        .collect()
}

#[test]
fn alternating_pair_is_jointly_sufficient() {
    let (mdp, a, b) = alternating_pair();
    assert!(!is_sufficient(&mdp, &a).unwrap());
    assert!(!is_sufficient(&mdp, &b).unwrap());
    assert!(is_set_sufficient(&mdp, &[a.clone(), b.clone()]).unwrap());
    let brute = mixtures(&a, &b, mdp.n_states())
        .iter()
        .any(|m| is_sufficient(&mdp, m).unwrap());
    assert!(brute);
}

#[test]
fn unreachable_goal_is_insufficient() {
    let mdp = line(4, 0.9);
    let stay = TabularPolicy::Deterministic(vec![1; 4]);
    assert!(!is_set_sufficient(&mdp, std::slice::from_ref(&stay)).unwrap());
    let c = is_partial(&mdp, &stay).unwrap();
    assert!(!c.holds && c.witness.is_empty());
    let optimal = TabularPolicy::Deterministic(vec![0; 4]);
    let c = is_partial(&mdp, &optimal).unwrap();
    assert!(c.holds);
    assert_eq!(c.witness, vec![0, 1, 2]);
}

#[test]
fn opposing_pair_contradicts_both_ways() {
    let (mdp, left, right) = opposing_pair(7);
    assert!(is_contradictory(&mdp, &left, &right).unwrap().holds);
    assert!(is_contradictory(&mdp, &right, &left).unwrap().holds);
    assert!(!is_contradictory(&mdp, &right, &right).unwrap().holds);
}

#[test]
fn adversarial_fixture() {
    let (mdp, forward, adversary) = adversarial_pair(5);
    assert!(is_sufficient(&mdp, &forward).unwrap());
    assert!(!is_sufficient(&mdp, &adversary).unwrap());
    let c = is_contradictory(&mdp, &adversary, &forward).unwrap();
    assert_eq!(c.witness, vec![1, 2, 3]);
    assert!(!is_partial(&mdp, &adversary).unwrap().holds);
}

#[test]
fn grid_corner_teachers_are_partial_and_jointly_sufficient() {
    let grid = PathGrid::new([3, 0, 2, 1], 0.99);
    let v_star = optimal_value(&grid.mdp).values;
    let corners: Vec<TabularPolicy> = (0..4).map(|i| grid.corner_teacher(i)).collect();
    for (i, t) in corners.iter().enumerate() {
        let c = is_partial(&grid.mdp, t).unwrap();
        assert!(c.holds, "corner {i}");
        let own_leg = (0..grid.goal_state()).filter(|&s| {
            let (k, cell) = grid.decode(s).unwrap();
            grid.order[k] == i && cell != corner_cell(i)
        });
        for s in own_leg {
            assert!(c.witness.contains(&s), "corner {i} state {s}");
        }
        assert!(!is_sufficient(&grid.mdp, t).unwrap());
    }
    assert!(is_set_sufficient(&grid.mdp, &corners).unwrap());
    assert!(!is_set_sufficient(&grid.mdp, &corners[..3]).unwrap());
    let start = grid.mdp.rho0().iter().position(|&p| p > 0.0).unwrap();
    let sufficient = policy_value(&grid.mdp, &grid.sufficient_teacher()).unwrap();
    assert!((sufficient.get(start) - v_star[start]).abs() < 1e-6);
}

#[test]
fn grid_midpoint_and_endpoint_contradict_each_other() {
    let seg = PathSegment::new(0, 3, true, 0.99);
    let mid = seg.midpoint_teacher();
    let end = seg.endpoint_teacher();
    assert!(is_contradictory(&seg.mdp, &mid, &end).unwrap().holds);
    assert!(is_contradictory(&seg.mdp, &end, &mid).unwrap().holds);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_teacher_keeps_sufficiency(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (mdp, a) = random_deterministic(&mut r, 10, 3);
        let (_, b) = random_deterministic(&mut r, 10, 3);
        let b = match b {
            TabularPolicy::Deterministic(v) => {
                TabularPolicy::Deterministic((0..mdp.n_states()).map(|s| v.get(s).copied().unwrap_or(0) % mdp.n_actions()).collect())
            }
            other => other,
        };
        if is_set_sufficient(&mdp, std::slice::from_ref(&a)).unwrap() {
            prop_assert!(is_set_sufficient(&mdp, &[a.clone(), b.clone()]).unwrap());
        }
        let alone = is_partial(&mdp, &a).unwrap();
        let twice = is_partial(&mdp, &a).unwrap();
        prop_assert_eq!(alone, twice);
    }

    #[test]
    fn values_stay_in_range(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (mdp, policy) = random_stochastic(&mut r, 8, 3);
        let v = policy_value(&mdp, &policy).unwrap();
        let top = 1.0 / (1.0 - mdp.gamma());
        prop_assert!(v.values.iter().all(|&x| x >= -1e-9 && x <= top + 1e-9));
    }
}
