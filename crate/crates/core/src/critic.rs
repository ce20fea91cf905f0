//! Bayesian critic built on Monte Carlo dropout: posterior samples, their
//! Gaussian summary, the α-divergence critic loss and the sampled actor loss.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::nn::{Gradients, MaskBatch, Mlp};

/// Rows pushed through the network at once when evaluating K-sample losses.
const CHUNK_ROWS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticConfig {
    /// Monte Carlo samples per evaluation.
    pub k: usize,
    pub alpha: f64,
    /// Dropout precision.
    pub tau: f64,
    pub keep_prob: f64,
    pub gamma: f64,
    /// Coefficient on the squared weight norm. Off by default.
    pub weight_decay: f64,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig {
            k: 50,
            alpha: 0.5,
            tau: 10.0,
            keep_prob: 0.8,
            gamma: 0.99,
            weight_decay: 0.0,
        }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.alpha == 0.0 || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(
                "alpha must be finite and non-zero".into(),
            ));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig(
                "tau_precision must be positive".into(),
            ));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::InvalidConfig("keep_prob must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig("gamma must lie in [0, 1]".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(
                "weight decay must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEstimate {
    pub mu: f64,
    pub var: f64,
}

/// Moment fit with the dropout precision floor: `var = E[x²] − μ² + 1/τ`.
pub fn fit_gaussian(samples: &[f64], tau: f64) -> Result<GaussianEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig(
            "cannot fit a Gaussian to zero samples".into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(
            "tau_precision must be positive".into(),
        ));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let second = samples.iter().map(|x| x * x).sum::<f64>() / n;
    let spread = (second - mu * mu).max(0.0);
    Ok(GaussianEstimate {
        mu,
        var: spread + 1.0 / tau,
    })
}

/// `P(Z_i > Z_j)` for independent Gaussians.
pub fn prob_improvement(zi: GaussianEstimate, zj: GaussianEstimate) -> f64 {
    let std_normal = Normal::standard();
    std_normal.cdf((zi.mu - zj.mu) / (zi.var + zj.var).sqrt())
}

/// Commitment threshold `β · ψ^t_c`.
pub fn commitment_threshold(beta: f64, psi: f64, t_c: u32) -> f64 {
    beta * psi.powi(t_c as i32)
}

/// Critic input rows `[s, a]`.
pub fn concat_inputs(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[states, actions]).expect("matching row counts")
}

#[cfg(test)]
fn repeat_rows(x: ArrayView2<f64>, times: usize) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n * times, d));
    for (i, row) in x.rows().into_iter().enumerate() {
        for k in 0..times {
            out.row_mut(i * times + k).assign(&row);
        }
    }
    out
}

/// `K` posterior samples of `Q(s, a)` for one critic input.
pub fn posterior_samples<R: Rng + ?Sized>(
    critic: &Mlp,
    input: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let x =
        ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(posterior_samples_batch(critic, x, k, rng)?.row(0).to_vec())
}

/// `K` posterior samples for each input row; result is `(rows, K)`. Masks
/// are drawn row by row, each row getting `K` fresh masks.
pub fn posterior_samples_batch<R: Rng + ?Sized>(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    k: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let n = inputs.nrows();
    let masks = critic.sample_masks(n * k, rng);
    let q = critic
        .forward_trace_repeated(inputs, k, Some(masks))?
        .output;
    q.into_shape_with_order((n, k))
        .map_err(|e| Error::Shape(e.to_string()))
}

/// Per-transition α-divergence data term over residuals `δ_k`:
/// `−(1/α) · log Σ_k exp(−(ατ/2) δ_k²)`.
pub fn alpha_divergence_term(residuals: &[f64], alpha: f64, tau: f64) -> f64 {
    let c: Vec<f64> = residuals
        .iter()
        .map(|d| -0.5 * alpha * tau * d * d)
        .collect();
    -log_sum_exp(&c) / alpha
}

fn log_sum_exp(c: &[f64]) -> f64 {
    let m = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + c.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check_batch(inputs: ArrayView2<f64>, targets: &[f64]) -> Result<()> {
    if inputs.nrows() == 0 {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    if inputs.nrows() != targets.len() {
        return Err(Error::Shape(format!(
            "{} critic inputs but {} targets",
            inputs.nrows(),
            targets.len()
        )));
    }
    Ok(())
}

/// One chunk of transitions; returns the summed data term and, when asked,
/// the gradient of that sum scaled by `grad_scale`.
fn critic_chunk(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    targets: &[f64],
    masks: MaskBatch,
    cfg: &CriticConfig,
    grad_scale: Option<f64>,
) -> Result<(f64, Option<Gradients>)> {
    let k = cfg.k;
    let n = inputs.nrows();
    let trace = critic.forward_trace_repeated(inputs, k, Some(masks))?;
    let q = trace.output.as_slice().expect("contiguous output");
    let mut total = 0.0;
    let mut grad_q = Array2::zeros((n * k, 1));
    let gq = grad_q.as_slice_mut().expect("contiguous");
    let mut residuals = vec![0.0; k];
    let mut c = vec![0.0; k];
    for i in 0..n {
        for j in 0..k {
            let d = targets[i] - q[i * k + j];
            residuals[j] = d;
            c[j] = -0.5 * cfg.alpha * cfg.tau * d * d;
        }
        let lse = log_sum_exp(&c);
        total += -lse / cfg.alpha;
        if let Some(scale) = grad_scale {
            for j in 0..k {
                // d/dQ_k of −(1/α)·lse = −τ · softmax_k · δ_k
                let w = (c[j] - lse).exp();
                gq[i * k + j] = -cfg.tau * w * residuals[j] * scale;
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("critic loss is not finite".into()));
    }
    let grads = match grad_scale {
        Some(_) => Some(critic.backward(&trace, grad_q.view())?.0),
        None => None,
    };
    Ok((total, grads))
}

fn add_weight_decay(critic: &Mlp, grads: &mut Gradients, coeff: f64) {
    for (g, w) in grads.weights.iter_mut().zip(critic.weights()) {
        g.scaled_add(2.0 * coeff, w);
    }
}

fn chunk_len(k: usize) -> usize {
    (CHUNK_ROWS / k.max(1)).max(1)
}

/// Critic loss and gradient with explicit masks (`batch · K` rows, transition
/// `i` using rows `i·K .. (i+1)·K`).
pub fn critic_loss_and_grad_masked(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    targets: &[f64],
    masks: &MaskBatch,
    cfg: &CriticConfig,
) -> Result<(f64, Gradients)> {
    check_batch(inputs, targets)?;
    if masks.rows() != inputs.nrows() * cfg.k {
        return Err(Error::Shape("need K masks per transition".into()));
    }
    let n = inputs.nrows();
    let step = chunk_len(cfg.k);
    let mut total = 0.0;
    let mut grads = Gradients::zeros_like(critic);
    for start in (0..n).step_by(step) {
        let end = (start + step).min(n);
        let m = masks.slice_rows(start * cfg.k, end * cfg.k);
        let (l, g) = critic_chunk(
            critic,
            inputs.slice(s![start..end, ..]),
            &targets[start..end],
            m,
            cfg,
            Some(1.0 / n as f64),
        )?;
        total += l;
        grads.add_assign(&g.expect("gradient requested"));
    }
    add_weight_decay(critic, &mut grads, cfg.weight_decay);
    Ok((
        total / n as f64 + cfg.weight_decay * critic.weight_sq_norm(),
        grads,
    ))
}

/// Critic loss and gradient with fresh masks drawn chunk by chunk.
pub fn critic_loss_and_grad<R: Rng + ?Sized>(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    targets: &[f64],
    cfg: &CriticConfig,
    rng: &mut R,
) -> Result<(f64, Gradients)> {
    check_batch(inputs, targets)?;
    let n = inputs.nrows();
    let step = chunk_len(cfg.k);
    let mut total = 0.0;
    let mut grads = Gradients::zeros_like(critic);
    for start in (0..n).step_by(step) {
        let end = (start + step).min(n);
        let masks = critic.sample_masks((end - start) * cfg.k, rng);
        let (l, g) = critic_chunk(
            critic,
            inputs.slice(s![start..end, ..]),
            &targets[start..end],
            masks,
            cfg,
            Some(1.0 / n as f64),
        )?;
        total += l;
        grads.add_assign(&g.expect("gradient requested"));
    }
    add_weight_decay(critic, &mut grads, cfg.weight_decay);
    Ok((
        total / n as f64 + cfg.weight_decay * critic.weight_sq_norm(),
        grads,
    ))
}

/// Critic loss with fresh masks, no gradient.
pub fn critic_loss<R: Rng + ?Sized>(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    targets: &[f64],
    cfg: &CriticConfig,
    rng: &mut R,
) -> Result<f64> {
    check_batch(inputs, targets)?;
    let n = inputs.nrows();
    let step = chunk_len(cfg.k);
    let mut total = 0.0;
    for start in (0..n).step_by(step) {
        let end = (start + step).min(n);
        let masks = critic.sample_masks((end - start) * cfg.k, rng);
        let (l, _) = critic_chunk(
            critic,
            inputs.slice(s![start..end, ..]),
            &targets[start..end],
            masks,
            cfg,
            None,
        )?;
        total += l;
    }
    Ok(total / n as f64 + cfg.weight_decay * critic.weight_sq_norm())
}

/// Squared Bellman error of a point critic, `mean (y − Q(s, a))²`, without
/// dropout.
pub fn point_critic_loss_and_grad(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    targets: &[f64],
) -> Result<(f64, Gradients)> {
    check_batch(inputs, targets)?;
    let n = inputs.nrows() as f64;
    let trace = critic.forward_trace(inputs, None)?;
    let q = trace.output.column(0);
    let mut grad_q = Array2::zeros((targets.len(), 1));
    let mut total = 0.0;
    for (i, (&y, &qi)) in targets.iter().zip(q.iter()).enumerate() {
        let d = y - qi;
        total += d * d;
        grad_q[[i, 0]] = -2.0 * d / n;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("point critic loss is not finite".into()));
    }
    let (grads, _) = critic.backward(&trace, grad_q.view())?;
    Ok((total / n, grads))
}

/// Actor loss `−Σ_k Q_k(s, π(s))` averaged over states, with explicit masks
/// (`batch · K` rows); gradient is with respect to the actor only.
pub fn actor_loss_and_grad_masked(
    actor: &Mlp,
    critic: &Mlp,
    states: ArrayView2<f64>,
    masks: &MaskBatch,
    k: usize,
) -> Result<(f64, Gradients)> {
    if states.nrows() == 0 {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    if masks.rows() != states.nrows() * k {
        return Err(Error::Shape("need K masks per state".into()));
    }
    actor_loss_inner(actor, critic, states, k, |a, b| Ok(masks.slice_rows(a, b)))
}

/// Actor loss and gradient with fresh critic masks.
pub fn actor_loss_and_grad<R: Rng + ?Sized>(
    actor: &Mlp,
    critic: &Mlp,
    states: ArrayView2<f64>,
    k: usize,
    rng: &mut R,
) -> Result<(f64, Gradients)> {
    if states.nrows() == 0 {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    actor_loss_inner(actor, critic, states, k, |a, b| {
        Ok(critic.sample_masks(b - a, rng))
    })
}

fn actor_loss_inner(
    actor: &Mlp,
    critic: &Mlp,
    states: ArrayView2<f64>,
    k: usize,
    mut masks_for: impl FnMut(usize, usize) -> Result<MaskBatch>,
) -> Result<(f64, Gradients)> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let n = states.nrows();
    let trace = actor.forward_trace(states, None)?;
    let actions = &trace.output;
    let state_dim = states.ncols();
    let mut grad_actions = Array2::zeros(actions.dim());
    let mut total = 0.0;
    let step = chunk_len(k);
    for start in (0..n).step_by(step) {
        let end = (start + step).min(n);
        let inputs = concat_inputs(
            states.slice(s![start..end, ..]),
            actions.slice(s![start..end, ..]),
        );
        let masks = masks_for(start * k, end * k)?;
        let ctrace = critic.forward_trace_repeated(inputs.view(), k, Some(masks))?;
        total -= ctrace.output.sum();
        let g = Array2::from_elem(ctrace.output.dim(), -1.0 / n as f64);
        let gin = critic.input_gradient(&ctrace, g.view())?;
        grad_actions
            .slice_mut(s![start..end, ..])
            .assign(&gin.slice(s![.., state_dim..]));
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("actor loss is not finite".into()));
    }
    let (grads, _) = actor.backward(&trace, grad_actions.view())?;
    Ok((total / n as f64, grads))
}

/// Bootstrap target `r + γ · q_next`.
pub fn behavioral_target(reward: f64, gamma: f64, q_next: f64) -> f64 {
    reward + gamma * q_next
}
