//! Small feed-forward network engine used for the actor, the critic and the
//! DQN selector.
//!
//! Everything is batched: a batch is an `(rows, width)` matrix and every row
//! may carry its own dropout mask. Gradients are obtained by a hand-written
//! reverse pass over a recorded [`ForwardTrace`]; masks are constants of that
//! pass.
//!
//! Layout: `weights[l]` has shape `(in, out)` so a layer is `X · W + b`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    /// `bound * tanh(z)`.
    ScaledTanh(f64),
}

/// Weight initialisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` everywhere, optionally with the last
    /// layer drawn from `U(-s, s)`.
    FanIn {
        final_layer: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    hidden_activation: Activation,
    output_activation: Activation,
    keep_prob: f64,
}

/// Dropout mask for one sample: one vector per hidden layer, entries are 0
/// or `1 / keep_prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub layers: Vec<Array1<f64>>,
}

/// Row-wise dropout masks for a batch; `layers[l]` has shape `(rows, width_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskBatch {
    pub layers: Vec<Array2<f64>>,
}

impl MaskBatch {
    pub fn rows(&self) -> usize {
        self.layers.first().map_or(0, |m| m.nrows())
    }

    /// Broadcast a single-sample mask to `rows` identical rows.
    pub fn broadcast(mask: &DropoutMask, rows: usize) -> Self {
        let layers = mask
            .layers
            .iter()
            .map(|m| {
                let mut out = Array2::zeros((rows, m.len()));
                out.rows_mut().into_iter().for_each(|mut r| r.assign(m));
                out
            })
            .collect();
        MaskBatch { layers }
    }

    /// Copy of rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        MaskBatch {
            layers: self
                .layers
                .iter()
                .map(|l| l.slice(ndarray::s![start..end, ..]).to_owned())
                .collect(),
        }
    }
}

/// Per-parameter gradients (or any parameter-shaped accumulator).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            biases: net
                .biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|w| *w *= s);
        self.biases.iter_mut().for_each(|b| *b *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Flattened view in parameter order (weights of layer 0, bias 0, ...).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

/// Intermediate values of a batched forward pass, kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input to each layer (for hidden layers: activation times mask).
    layer_inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    masks: Option<MaskBatch>,
    repeats: usize,
    pub output: Array2<f64>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        keep_prob: f64,
        init: Init,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "layer sizes must have at least two positive entries, got {sizes:?}"
            )));
        }
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "keep_prob must lie in (0, 1], got {keep_prob}"
            )));
        }
        let n_layers = sizes.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = match init {
                Init::Zeros => 0.0,
                Init::FanIn { final_layer } => match final_layer {
                    Some(s) if l + 1 == n_layers => s,
                    _ => 1.0 / (fan_in as f64).sqrt(),
                },
            };
            let mut draw = || {
                if limit == 0.0 {
                    0.0
                } else {
                    rng.random_range(-limit..limit)
                }
            };
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| draw());
            let b = Array1::from_shape_fn(fan_out, |_| draw());
            weights.push(w);
            biases.push(b);
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            hidden_activation,
            output_activation,
            keep_prob,
        })
    }

    /// Build a network from explicit parameters.
    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        hidden_activation: Activation,
        output_activation: Activation,
        keep_prob: f64,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape("need one bias per weight matrix".into()));
        }
        let mut sizes = vec![weights[0].nrows()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.nrows() != *sizes.last().unwrap() || b.len() != w.ncols() {
                return Err(Error::Shape(format!("layer {l} does not chain")));
            }
            sizes.push(w.ncols());
        }
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "keep_prob must lie in (0, 1], got {keep_prob}"
            )));
        }
        Ok(Mlp {
            sizes,
            weights,
            biases,
            hidden_activation,
            output_activation,
            keep_prob,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.sizes[1..self.sizes.len() - 1]
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    pub fn set_keep_prob(&mut self, keep_prob: f64) -> Result<()> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "keep_prob must lie in (0, 1], got {keep_prob}"
            )));
        }
        self.keep_prob = keep_prob;
        Ok(())
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    fn same_architecture(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes
    }

    /// Draw one dropout mask: each hidden unit kept with probability
    /// `keep_prob`, kept entries scaled by `1 / keep_prob`.
    pub fn sample_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> DropoutMask {
        let layers = self
            .hidden_sizes()
            .iter()
            .map(|&w| {
                let mut m = Array1::zeros(w);
                fill_mask(m.as_slice_mut().unwrap(), self.keep_prob, rng);
                m
            })
            .collect();
        DropoutMask { layers }
    }

    /// Draw `rows` independent masks.
    pub fn sample_masks<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> MaskBatch {
        let layers = self
            .hidden_sizes()
            .iter()
            .map(|&w| {
                let mut m = Array2::zeros((rows, w));
                fill_mask(m.as_slice_mut().unwrap(), self.keep_prob, rng);
                m
            })
            .collect();
        MaskBatch { layers }
    }

    fn check_input(&self, cols: usize, masks: Option<&MaskBatch>, rows: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Shape(format!(
                "input width {cols} does not match network input {}",
                self.input_dim()
            )));
        }
        if let Some(m) = masks {
            let hidden = self.hidden_sizes();
            if m.layers.len() != hidden.len()
                || m.layers
                    .iter()
                    .zip(hidden)
                    .any(|(l, &w)| l.nrows() != rows || l.ncols() != w)
            {
                return Err(Error::Shape("dropout mask does not match network".into()));
            }
        }
        Ok(())
    }

    /// Single-sample forward pass. No mask means every hidden unit is kept
    /// unscaled.
    pub fn forward(&self, input: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let batch = mask.map(|m| MaskBatch::broadcast(m, 1));
        if let Some(m) = mask {
            if m.layers.len() != self.hidden_sizes().len() {
                return Err(Error::Shape("dropout mask does not match network".into()));
            }
        }
        let out = self.forward_batch(x, batch.as_ref())?;
        Ok(out.row(0).to_vec())
    }

    pub fn forward_batch(
        &self,
        inputs: ArrayView2<f64>,
        masks: Option<&MaskBatch>,
    ) -> Result<Array2<f64>> {
        self.check_input(inputs.ncols(), masks, inputs.nrows())?;
        let n_layers = self.weights.len();
        let mut h = standard(inputs.dot(&self.weights[0]));
        for l in 0..n_layers {
            if l > 0 {
                h = standard(h.dot(&self.weights[l]));
            }
            let hidden = l + 1 < n_layers;
            let act = if hidden {
                self.hidden_activation
            } else {
                self.output_activation
            };
            let mask = if hidden {
                masks.map(|m| &m.layers[l])
            } else {
                None
            };
            bias_activate(&mut h, &self.biases[l], act, mask);
        }
        Ok(h)
    }

    /// Forward pass that records what the reverse pass needs.
    pub fn forward_trace(
        &self,
        inputs: ArrayView2<f64>,
        masks: Option<MaskBatch>,
    ) -> Result<ForwardTrace> {
        self.forward_trace_repeated(inputs, 1, masks)
    }

    /// Forward pass in which every input row is used `repeats` times in a
    /// row (row `i` feeds output rows `i·repeats .. (i+1)·repeats`), each copy
    /// with its own mask. The shared first-layer product is computed once.
    pub fn forward_trace_repeated(
        &self,
        inputs: ArrayView2<f64>,
        repeats: usize,
        masks: Option<MaskBatch>,
    ) -> Result<ForwardTrace> {
        if repeats == 0 {
            return Err(Error::Shape("repeats must be positive".into()));
        }
        let rows = inputs.nrows() * repeats;
        self.check_input(inputs.ncols(), masks.as_ref(), rows)?;
        let n_layers = self.weights.len();
        let mut layer_inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        let mut h = inputs.to_owned();
        for l in 0..n_layers {
            let mut z = standard(h.dot(&self.weights[l]));
            add_bias(&mut z, &self.biases[l]);
            if l == 0 && repeats > 1 {
                z = repeat_rows(&z, repeats);
            }
            let hidden = l + 1 < n_layers;
            let act = if hidden {
                self.hidden_activation
            } else {
                self.output_activation
            };
            let mut a = z.clone();
            let mask = if hidden {
                masks.as_ref().map(|m| &m.layers[l])
            } else {
                None
            };
            activate(&mut a, act, mask);
            layer_inputs.push(h);
            pre.push(z);
            h = a;
        }
        Ok(ForwardTrace {
            layer_inputs,
            pre,
            masks,
            repeats,
            output: h,
        })
    }

    /// Reverse pass: given `dL/d(output)` for every row, return the parameter
    /// gradients and `dL/d(input)` (summed over repeats).
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_output: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let (grads, grad_input) = self.reverse(trace, grad_output, true)?;
        Ok((grads.expect("parameter gradients requested"), grad_input))
    }

    /// Reverse pass for `dL/d(input)` only, skipping parameter gradients.
    pub fn input_gradient(
        &self,
        trace: &ForwardTrace,
        grad_output: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        Ok(self.reverse(trace, grad_output, false)?.1)
    }

    fn reverse(
        &self,
        trace: &ForwardTrace,
        grad_output: ArrayView2<f64>,
        params: bool,
    ) -> Result<(Option<Gradients>, Array2<f64>)> {
        if grad_output.dim() != trace.output.dim() {
            return Err(Error::Shape(format!(
                "output gradient shape {:?} does not match output {:?}",
                grad_output.dim(),
                trace.output.dim()
            )));
        }
        let n_layers = self.weights.len();
        let mut gw = Vec::with_capacity(n_layers);
        let mut gb = Vec::with_capacity(n_layers);
        let mut g = standard(grad_output.to_owned());
        scale_by_derivative(
            &mut g,
            &trace.pre[n_layers - 1],
            self.output_activation,
            None,
        );
        let mut grad_input = Array2::zeros((0, 0));
        for l in (0..n_layers).rev() {
            if l == 0 && trace.repeats > 1 {
                g = sum_repeats(&g, trace.repeats);
            }
            if params {
                gw.push(trace.layer_inputs[l].t().dot(&g));
                gb.push(g.sum_axis(Axis(0)));
            }
            let mut gi = standard(g.dot(&self.weights[l].t()));
            if l > 0 {
                let mask = trace.masks.as_ref().map(|m| &m.layers[l - 1]);
                scale_by_derivative(&mut gi, &trace.pre[l - 1], self.hidden_activation, mask);
                g = gi;
            } else {
                grad_input = gi;
            }
        }
        if grad_input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(
                "non-finite gradient in reverse pass".into(),
            ));
        }
        if !params {
            return Ok((None, grad_input));
        }
        gw.reverse();
        gb.reverse();
        let grads = Gradients {
            weights: gw,
            biases: gb,
        };
        if !grads.is_finite() {
            return Err(Error::NonFinite(
                "non-finite gradient in reverse pass".into(),
            ));
        }
        Ok((Some(grads), grad_input))
    }

    /// Polyak averaging: `self = tau * source + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        if !self.same_architecture(source) {
            return Err(Error::Shape(format!(
                "soft update between {:?} and {:?}",
                self.sizes, source.sizes
            )));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidConfig(format!(
                "tau must lie in [0, 1], got {tau}"
            )));
        }
        for (t, s) in self.weights.iter_mut().zip(&source.weights) {
            Zip::from(t)
                .and(s)
                .for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
        }
        for (t, s) in self.biases.iter_mut().zip(&source.biases) {
            Zip::from(t)
                .and(s)
                .for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
        }
        Ok(())
    }

    /// Copy all parameters from `source`.
    pub fn copy_from(&mut self, source: &Mlp) -> Result<()> {
        if !self.same_architecture(source) {
            return Err(Error::Shape("copy between different architectures".into()));
        }
        self.weights.clone_from(&source.weights);
        self.biases.clone_from(&source.biases);
        Ok(())
    }
}

/// `target = tau * source + (1 - tau) * target`, elementwise.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<()> {
    target.soft_update_from(source, tau)
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn repeat_rows(a: &Array2<f64>, times: usize) -> Array2<f64> {
    let (n, w) = a.dim();
    let src = a.as_slice().expect("contiguous");
    let mut out = Vec::with_capacity(n * times * w);
    for row in src.chunks_exact(w) {
        for _ in 0..times {
            out.extend_from_slice(row);
        }
    }
    Array2::from_shape_vec((n * times, w), out).expect("shape")
}

/// Sum each block of `times` consecutive rows.
fn sum_repeats(a: &Array2<f64>, times: usize) -> Array2<f64> {
    let (rows, w) = a.dim();
    let src = a.as_slice().expect("contiguous");
    let mut out = Array2::zeros((rows / times, w));
    let dst = out.as_slice_mut().expect("contiguous");
    for (i, block) in src.chunks_exact(w * times).enumerate() {
        let o = &mut dst[i * w..(i + 1) * w];
        for row in block.chunks_exact(w) {
            o.iter_mut().zip(row).for_each(|(o, &v)| *o += v);
        }
    }
    out
}

fn add_bias(z: &mut Array2<f64>, bias: &Array1<f64>) {
    let width = bias.len();
    let b = bias.as_slice().expect("contiguous bias");
    let zs = z.as_slice_mut().expect("contiguous activations");
    for row in zs.chunks_exact_mut(width) {
        for (v, &bb) in row.iter_mut().zip(b) {
            *v += bb;
        }
    }
}

fn activate(z: &mut Array2<f64>, act: Activation, mask: Option<&Array2<f64>>) {
    let zs = z.as_slice_mut().expect("contiguous activations");
    match act {
        Activation::Identity => {}
        Activation::Relu => zs.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::ScaledTanh(b) => zs.iter_mut().for_each(|v| *v = b * v.tanh()),
    }
    if let Some(m) = mask {
        let ms = m.as_slice().expect("contiguous mask");
        zs.iter_mut().zip(ms).for_each(|(v, &k)| *v *= k);
    }
}

fn bias_activate(
    z: &mut Array2<f64>,
    bias: &Array1<f64>,
    act: Activation,
    mask: Option<&Array2<f64>>,
) {
    add_bias(z, bias);
    activate(z, act, mask);
}

/// `g *= act'(pre)` (and by the mask when given).
fn scale_by_derivative(
    g: &mut Array2<f64>,
    pre: &Array2<f64>,
    act: Activation,
    mask: Option<&Array2<f64>>,
) {
    let gs = g.as_slice_mut().expect("contiguous gradient");
    let ps = pre.as_slice().expect("contiguous pre-activation");
    match act {
        Activation::Identity => {}
        Activation::Relu => gs.iter_mut().zip(ps).for_each(|(g, &z)| {
            if z <= 0.0 {
                *g = 0.0
            }
        }),
        Activation::ScaledTanh(b) => gs.iter_mut().zip(ps).for_each(|(g, &z)| {
            let t = z.tanh();
            *g *= b * (1.0 - t * t)
        }),
    }
    if let Some(m) = mask {
        let ms = m.as_slice().expect("contiguous mask");
        gs.iter_mut().zip(ms).for_each(|(g, &k)| *g *= k);
    }
}

fn fill_mask<R: Rng + ?Sized>(out: &mut [f64], keep_prob: f64, rng: &mut R) {
    if keep_prob >= 1.0 {
        out.fill(1.0);
        return;
    }
    let scale = 1.0 / keep_prob;
    // two 32-bit uniforms per 64-bit draw; resolution 2^-32
    let threshold = (keep_prob * 4_294_967_296.0) as u64;
    let keep = |bits: u64| if bits < threshold { scale } else { 0.0 };
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let r = rng.next_u64();
        pair[0] = keep(r & 0xffff_ffff);
        pair[1] = keep(r >> 32);
    }
    for v in chunks.into_remainder() {
        *v = keep(rng.next_u64() & 0xffff_ffff);
    }
}

/// Adam optimiser state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != net.weights.len()
            || grads
                .weights
                .iter()
                .zip(&net.weights)
                .any(|(g, w)| g.dim() != w.dim())
            || grads
                .biases
                .iter()
                .zip(&net.biases)
                .any(|(g, b)| g.dim() != b.dim())
        {
            return Err(Error::Shape(
                "gradient shapes do not match parameters".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for l in 0..net.weights.len() {
            Zip::from(&mut net.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .and(&grads.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut net.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .and(&grads.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}
