//! Shared oracles for the integration tests.
#![allow(dead_code)]

use acteach::envs::tabular::{TabularMdp, TabularPolicy};
use acteach::nn::{Activation, Init, Mlp};
use acteach::StreamRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Standard normal CDF by composite Simpson integration of the density from
/// 0 to |x|.
pub fn normal_cdf(x: f64) -> f64 {
    let n = 20_000;
    let h = x.abs() / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(x.abs());
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(i as f64 * h);
    }
    let half = s * h / 3.0;
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Random net with the given sizes and ReLU hidden units.
pub fn random_net(sizes: &[usize], output: Activation, keep_prob: f64, r: &mut StreamRng) -> Mlp {
    let mut net = Mlp::new(
        sizes,
        Activation::Relu,
        output,
        keep_prob,
        Init::FanIn { final_layer: None },
        r,
    )
    .unwrap();
    let flat: Vec<f64> = net
        .to_flat()
        .iter()
        .map(|_| r.random_range(-0.8..0.8))
        .collect();
    net.set_flat(&flat).unwrap();
    net
}

/// Central finite differences of `f` at the parameters of `net`.
pub fn numeric_gradient(net: &Mlp, step: f64, mut f: impl FnMut(&Mlp) -> f64) -> Vec<f64> {
    let base = net.to_flat();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + step;
        probe.set_flat(&p).unwrap();
        let up = f(&probe);
        p[i] = base[i] - step;
        probe.set_flat(&p).unwrap();
        let down = f(&probe);
        out.push((up - down) / (2.0 * step));
    }
    out
}

/// Largest violation of `|a − n| ≤ rtol·max(|a|, |n|) + atol`, as a ratio.
/// Values ≤ 1 pass.
pub fn gradient_mismatch(analytic: &[f64], numeric: &[f64], rtol: f64, atol: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (rtol * a.abs().max(n.abs()) + atol))
        .fold(0.0, f64::max)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Policy-induced transition matrix.
pub fn transition_matrix(mdp: &TabularMdp, policy: &TabularPolicy) -> Vec<Vec<f64>> {
    let n = mdp.n_states();
    let mut p = vec![vec![0.0; n]; n];
    for (s, row) in p.iter_mut().enumerate() {
        for (a, pa) in policy.action_probs(s) {
            for (sp, q) in mdp.successors(s, a) {
                row[sp] += pa * q;
            }
        }
    }
    p
}

/// States that reach the goal set with positive probability.
pub fn can_reach(p: &[Vec<f64>], mdp: &TabularMdp) -> Vec<bool> {
    let n = p.len();
    let mut ok: Vec<bool> = (0..n).map(|s| mdp.is_goal(s)).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !ok[s] && (0..n).any(|t| p[s][t] > 0.0 && ok[t]) {
                ok[s] = true;
                changed = true;
            }
        }
        if !changed {
            return ok;
        }
    }
}

/// Absorption probability into `G` and `E[γ^t · 1(reach)]` by direct linear
/// solves.
pub fn reach_oracle(mdp: &TabularMdp, policy: &TabularPolicy) -> (Vec<f64>, Vec<f64>) {
    let p = transition_matrix(mdp, policy);
    let n = p.len();
    let ok = can_reach(&p, mdp);
    let system = |gamma: f64| {
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for s in 0..n {
            a[s][s] = 1.0;
            if mdp.is_goal(s) {
                b[s] = 1.0;
            } else if ok[s] {
                for t in 0..n {
                    a[s][t] -= gamma * p[s][t];
                }
            }
        }
        solve(a, b)
    };
    (system(1.0), system(mdp.gamma()))
}
