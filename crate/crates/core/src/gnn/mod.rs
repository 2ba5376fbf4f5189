//! A small message-passing network that jointly refines a full-grid channel
//! estimate and predicts the noise power, with hand-written backprop.
//!
//! Architecture: three aggregate-and-transform layers over the pilot-to-node
//! graph,
//!
//! ```text
//! h_v^(i) = act( W_self x_v + W_nbr agg_{p in N(v)} x_p + b )
//! ```
//!
//! with feature widths `2 -> H -> H -> 2` (ReLU, ReLU, linear). `W_self` and
//! `W_nbr` may be tied (the default; the layer then computes `W (x_v +
//! agg_v) + b`). The noise head mean-pools the second layer's output over
//! all nodes and applies a `H -> H -> 1` ReLU MLP. Everything is `f64`;
//! checkpoints quantize through `f32`.

pub mod adam;
pub mod mat;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::flt;
use crate::graph::GraphTopology;
use crate::grid::ResourceGrid;
use crate::rng;
use mat::{axpy, dot, matvec_acc, matvec_t_acc, outer_acc, Mat};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GnnError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values produced at {stage}")]
    NonFinite { stage: &'static str },
}

/// Neighbor aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
}

impl Aggregation {
    pub fn name(&self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Aggregation::Mean),
            "sum" => Some(Aggregation::Sum),
            _ => None,
        }
    }
}

impl core::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Structural hyperparameters; part of every checkpoint.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelConfig {
    pub hidden_dim: usize,
    /// Share `W_self` and `W_nbr` within each layer.
    pub tied: bool,
    pub aggregation: Aggregation,
    /// The noise head is trained against `sigma^2 * noise_label_scale`;
    /// predictions divide it back out.
    pub noise_label_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: 32,
            tied: true,
            aggregation: Aggregation::Mean,
            noise_label_scale: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), GnnError> {
        if self.hidden_dim == 0 {
            return Err(GnnError::Config(String::from("hidden_dim must be >= 1")));
        }
        if !(self.noise_label_scale.is_finite() && self.noise_label_scale > 0.0) {
            return Err(GnnError::Config(String::from(
                "noise_label_scale must be finite and > 0",
            )));
        }
        Ok(())
    }
}

/// One aggregate-and-transform layer. `w_nbr = None` means tied weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayer {
    pub w_self: Mat,
    pub w_nbr: Option<Mat>,
    pub bias: Vec<f64>,
}

impl SageLayer {
    fn zeros(out_dim: usize, in_dim: usize, tied: bool) -> Self {
        SageLayer {
            w_self: Mat::zeros(out_dim, in_dim),
            w_nbr: if tied { None } else { Some(Mat::zeros(out_dim, in_dim)) },
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_self.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w_self.rows()
    }
}

/// Pooled noise head: `n_hat = w2 . relu(w1 pool + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseHead {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// All trainable tensors plus the structural config.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layers: [SageLayer; 3],
    pub noise: NoiseHead,
}

/// Layer feature widths `(in, out)` for a hidden size `h`.
fn layer_dims(h: usize) -> [(usize, usize); 3] {
    [(2, h), (h, h), (h, 2)]
}

impl ModelParams {
    /// All-zero parameters (gradient accumulators).
    pub fn zeros_like(config: &ModelConfig) -> Self {
        let h = config.hidden_dim;
        let [d1, d2, d3] = layer_dims(h);
        ModelParams {
            config: config.clone(),
            layers: [
                SageLayer::zeros(d1.1, d1.0, config.tied),
                SageLayer::zeros(d2.1, d2.0, config.tied),
                SageLayer::zeros(d3.1, d3.0, config.tied),
            ],
            noise: NoiseHead {
                w1: Mat::zeros(h, h),
                b1: vec![0.0; h],
                w2: vec![0.0; h],
                b2: 0.0,
            },
        }
    }

    /// Seeded init: every weight uniform in `(-1/sqrt(fan_in),
    /// +1/sqrt(fan_in))` drawn in canonical tensor order, biases zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, GnnError> {
        config.validate()?;
        let mut params = Self::zeros_like(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |m: &mut Mat| {
            let bound = 1.0 / flt::sqrt(m.cols() as f64);
            for w in m.as_mut_slice() {
                *w = rng::uniform_range(&mut rng, -bound, bound);
            }
        };
        for layer in params.layers.iter_mut() {
            fill(&mut layer.w_self);
            if let Some(wn) = layer.w_nbr.as_mut() {
                fill(wn);
            }
        }
        fill(&mut params.noise.w1);
        let bound = 1.0 / flt::sqrt(config.hidden_dim as f64);
        for w in params.noise.w2.iter_mut() {
            *w = rng::uniform_range(&mut rng, -bound, bound);
        }
        Ok(params)
    }

    /// Tensor names and shapes in canonical (flattening) order.
    pub fn tensor_specs(&self) -> Vec<(&'static str, Vec<usize>)> {
        const LAYER_NAMES: [[&str; 3]; 3] = [
            ["layer1.w_self", "layer1.w_nbr", "layer1.bias"],
            ["layer2.w_self", "layer2.w_nbr", "layer2.bias"],
            ["layer3.w_self", "layer3.w_nbr", "layer3.bias"],
        ];
        let mut specs = Vec::new();
        for (layer, names) in self.layers.iter().zip(LAYER_NAMES) {
            specs.push((names[0], vec![layer.out_dim(), layer.in_dim()]));
            if layer.w_nbr.is_some() {
                specs.push((names[1], vec![layer.out_dim(), layer.in_dim()]));
            }
            specs.push((names[2], vec![layer.out_dim()]));
        }
        specs.push(("noise.w1", vec![self.noise.w1.rows(), self.noise.w1.cols()]));
        specs.push(("noise.b1", vec![self.noise.b1.len()]));
        specs.push(("noise.w2", vec![self.noise.w2.len()]));
        specs.push(("noise.b2", vec![1]));
        specs
    }

    fn tensor_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.w_self.as_slice());
            if let Some(wn) = &layer.w_nbr {
                out.push(wn.as_slice());
            }
            out.push(layer.bias.as_slice());
        }
        out.push(self.noise.w1.as_slice());
        out.push(self.noise.b1.as_slice());
        out.push(self.noise.w2.as_slice());
        out.push(core::slice::from_ref(&self.noise.b2));
        out
    }

    fn tensor_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.layers.iter_mut() {
            out.push(layer.w_self.as_mut_slice());
            if let Some(wn) = layer.w_nbr.as_mut() {
                out.push(wn.as_mut_slice());
            }
            out.push(layer.bias.as_mut_slice());
        }
        out.push(self.noise.w1.as_mut_slice());
        out.push(self.noise.b1.as_mut_slice());
        out.push(self.noise.w2.as_mut_slice());
        out.push(core::slice::from_mut(&mut self.noise.b2));
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensor_slices().iter().map(|s| s.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for s in self.tensor_slices() {
            out.extend_from_slice(s);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<(), GnnError> {
        if flat.len() != self.param_count() {
            return Err(GnnError::Shape(alloc::format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for s in self.tensor_slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }

    /// Quantizes all parameters through `f32` (checkpoint precision).
    pub fn to_f32(&self) -> Vec<f32> {
        self.to_flat().iter().map(|&x| x as f32).collect()
    }

    pub fn load_f32(&mut self, flat: &[f32]) -> Result<(), GnnError> {
        let wide: Vec<f64> = flat.iter().map(|&x| x as f64).collect();
        self.load_flat(&wide)
    }

    /// Re-rounds the in-memory parameters to their `f32` representation so
    /// a freshly saved checkpoint reproduces this model exactly.
    pub fn quantize_f32(&mut self) {
        for s in self.tensor_slices_mut() {
            for w in s.iter_mut() {
                *w = *w as f32 as f64;
            }
        }
    }

    fn validate_shapes(&self) -> Result<(), GnnError> {
        self.config.validate()?;
        let h = self.config.hidden_dim;
        let dims = layer_dims(h);
        for (i, (layer, (in_dim, out_dim))) in self.layers.iter().zip(dims).enumerate() {
            let ok = layer.w_self.rows() == out_dim
                && layer.w_self.cols() == in_dim
                && layer.bias.len() == out_dim
                && layer.w_nbr.is_some() != self.config.tied
                && layer
                    .w_nbr
                    .as_ref()
                    .map(|w| w.rows() == out_dim && w.cols() == in_dim)
                    .unwrap_or(true);
            if !ok {
                return Err(GnnError::Shape(alloc::format!("layer {} tensors", i + 1)));
            }
        }
        let ok = self.noise.w1.rows() == h
            && self.noise.w1.cols() == h
            && self.noise.b1.len() == h
            && self.noise.w2.len() == h;
        if !ok {
            return Err(GnnError::Shape(String::from("noise head tensors")));
        }
        Ok(())
    }
}

/// Model outputs: per-node `[re, im]` channel estimate and the raw noise
/// prediction (scaled label space).
#[derive(Debug, Clone, PartialEq)]
pub struct GnnOutput {
    pub h_hat: Vec<f64>,
    pub noise_hat: f64,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    x: Vec<f64>,
    a1: Vec<f64>,
    h1: Vec<f64>,
    a2: Vec<f64>,
    h2: Vec<f64>,
    a3: Vec<f64>,
    h_gamma: Vec<f64>,
    r6: Vec<f64>,
}

impl Trace {
    /// Second-layer activations (exposed for inspection).
    pub fn h2(&self) -> &[f64] {
        &self.h2
    }
}

/// Reusable buffers for repeated passes over one graph. A full-grid
/// forward/backward touches tens of megabytes of activations; training
/// visits the graph tens of thousands of times, so the `*_into` entry
/// points reuse these buffers instead of reallocating them every sample.
#[derive(Debug, Default)]
pub struct Workspace {
    trace: Trace,
    out: Vec<f64>,
    noise_hat: f64,
    d_out: Vec<f64>,
    d_h2: Vec<f64>,
    d_h1: Vec<f64>,
    d_x: Vec<f64>,
    d_agg: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Sizes `buf` to `n` slots whose contents the caller fully overwrites.
fn resize_buf(buf: &mut Vec<f64>, n: usize) {
    if buf.len() != n {
        buf.clear();
        buf.resize(n, 0.0);
    }
}

/// Sizes `buf` to `n` zeroed slots (for accumulation).
fn resize_zeroed(buf: &mut Vec<f64>, n: usize) {
    resize_buf(buf, n);
    buf.fill(0.0);
}

/// Per-node neighbor aggregation of `dim`-wide features.
fn aggregate_into(
    topo: &GraphTopology,
    feats: &[f64],
    dim: usize,
    mode: Aggregation,
    out: &mut Vec<f64>,
) {
    let v_count = topo.num_nodes();
    let deg = topo.degree();
    let scale = match mode {
        Aggregation::Mean => 1.0 / deg as f64,
        Aggregation::Sum => 1.0,
    };
    resize_buf(out, v_count * dim);
    for v in 0..v_count {
        let dst = &mut out[v * dim..(v + 1) * dim];
        let nbrs = topo.neighbors_of(v);
        match nbrs.split_first() {
            None => dst.fill(0.0),
            Some((&first, rest)) => {
                let first = first as usize;
                dst.copy_from_slice(&feats[first * dim..(first + 1) * dim]);
                for &p in rest {
                    let p = p as usize;
                    axpy(1.0, &feats[p * dim..(p + 1) * dim], dst);
                }
            }
        }
        if scale != 1.0 {
            for x in dst.iter_mut() {
                *x *= scale;
            }
        }
    }
}

/// One layer over all nodes; `relu` selects the activation.
///
/// The per-node product is accumulated column-by-column over transposed
/// weight copies (`z += t_c * W^T_row(c)`), keeping the inner loop a
/// contiguous axpy the autovectorizer handles well — this loop carries most
/// of the forward-pass cost.
fn sage_forward_into(
    layer: &SageLayer,
    x: &[f64],
    agg: &[f64],
    v_count: usize,
    relu: bool,
    out: &mut Vec<f64>,
) {
    let in_dim = layer.in_dim();
    let out_dim = layer.out_dim();
    let wt_self = layer.w_self.transposed();
    let wt_nbr = layer.w_nbr.as_ref().map(Mat::transposed);
    resize_buf(out, v_count * out_dim);
    let mut t = vec![0.0; in_dim];
    for v in 0..v_count {
        let xi = &x[v * in_dim..(v + 1) * in_dim];
        let ai = &agg[v * in_dim..(v + 1) * in_dim];
        let zi = &mut out[v * out_dim..(v + 1) * out_dim];
        zi.copy_from_slice(&layer.bias);
        match &wt_nbr {
            None => {
                for (ti, (a, b)) in t.iter_mut().zip(xi.iter().zip(ai)) {
                    *ti = a + b;
                }
                for (c, &tc) in t.iter().enumerate() {
                    axpy(tc, wt_self.row(c), zi);
                }
            }
            Some(wn) => {
                for (c, &xc) in xi.iter().enumerate() {
                    axpy(xc, wt_self.row(c), zi);
                }
                for (c, &ac) in ai.iter().enumerate() {
                    axpy(ac, wn.row(c), zi);
                }
            }
        }
        if relu {
            for z in zi.iter_mut() {
                if *z < 0.0 {
                    *z = 0.0;
                }
            }
        }
    }
    out
}

fn check_finite(stage: &'static str, data: &[f64]) -> Result<(), GnnError> {
    // Eight independent accumulators: the check runs over multi-megabyte
    // activation buffers, and a single serial sum would be latency-bound.
    let mut acc = [0.0f64; 8];
    let chunks = data.chunks_exact(8);
    let tail = chunks.remainder();
    for c in chunks {
        for (a, x) in acc.iter_mut().zip(c) {
            *a += x;
        }
    }
    let sum: f64 = acc.iter().sum::<f64>() + tail.iter().sum::<f64>();
    if sum.is_finite() {
        Ok(())
    } else {
        Err(GnnError::NonFinite { stage })
    }
}

/// Full forward pass over the graph. `x` is the flattened `[re, im]` node
/// feature tensor in node-id order.
pub fn forward(
    params: &ModelParams,
    topo: &GraphTopology,
    x: &[f64],
) -> Result<(GnnOutput, Trace), GnnError> {
    params.validate_shapes()?;
    let v_count = topo.num_nodes();
    if x.len() != 2 * v_count {
        return Err(GnnError::Shape(alloc::format!(
            "expected {} input features, got {}",
            2 * v_count,
            x.len()
        )));
    }
    let h = params.config.hidden_dim;
    let mode = params.config.aggregation;

    let a1 = aggregate(topo, x, 2, mode);
    let h1 = sage_forward(&params.layers[0], x, &a1, v_count, true);
    check_finite("layer1", &h1)?;

    let a2 = aggregate(topo, &h1, h, mode);
    let h2 = sage_forward(&params.layers[1], &h1, &a2, v_count, true);
    check_finite("layer2", &h2)?;

    let a3 = aggregate(topo, &h2, h, mode);
    let out = sage_forward(&params.layers[2], &h2, &a3, v_count, false);
    check_finite("layer3", &out)?;

    // Noise head: mean-pool h2 over every node, then a 2-layer MLP.
    let mut h_gamma = vec![0.0; h];
    for v in 0..v_count {
        axpy(1.0, &h2[v * h..(v + 1) * h], &mut h_gamma);
    }
    let inv_v = 1.0 / v_count as f64;
    for g in h_gamma.iter_mut() {
        *g *= inv_v;
    }
    let mut r6 = params.noise.b1.clone();
    matvec_acc(&params.noise.w1, &h_gamma, &mut r6);
    for z in r6.iter_mut() {
        if *z < 0.0 {
            *z = 0.0;
        }
    }
    let noise_hat = dot(&params.noise.w2, &r6) + params.noise.b2;
    if !noise_hat.is_finite() {
        return Err(GnnError::NonFinite { stage: "noise_head" });
    }

    let trace = Trace { x: x.to_vec(), a1, h1, a2, h2, a3, h_gamma, r6 };
    Ok((GnnOutput { h_hat: out, noise_hat }, trace))
}

/// Loss terms for one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    /// `(1/V) sum_v |h_hat_v - h_v|^2`.
    pub channel_mse: f64,
    /// `(n_hat - n)^2` in scaled label space.
    pub noise_sq_err: f64,
    /// `lambda_ce * channel_mse + lambda_no * noise_sq_err`.
    pub total: f64,
}

/// Loss weights.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LossWeights {
    pub lambda_ce: f64,
    pub lambda_no: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_ce: 1.0, lambda_no: 1.0 }
    }
}

pub fn loss_parts(
    output: &GnnOutput,
    label_h: &[f64],
    label_noise: f64,
    weights: &LossWeights,
) -> LossParts {
    debug_assert_eq!(output.h_hat.len(), label_h.len());
    let v_count = output.h_hat.len() / 2;
    let se: f64 = output
        .h_hat
        .iter()
        .zip(label_h)
        .map(|(o, l)| (o - l) * (o - l))
        .sum();
    let channel_mse = se / v_count as f64;
    let d = output.noise_hat - label_noise;
    let noise_sq_err = d * d;
    LossParts {
        channel_mse,
        noise_sq_err,
        total: weights.lambda_ce * channel_mse + weights.lambda_no * noise_sq_err,
    }
}

/// Backward pass for one layer: accumulates weight gradients and routes
/// `d_z` into the previous activations (both the self path and, through the
/// adjacency, the aggregation path).
fn sage_backward(
    layer: &SageLayer,
    grads: &mut SageLayer,
    topo: &GraphTopology,
    mode: Aggregation,
    x: &[f64],
    agg: &[f64],
    d_z: &[f64],
    d_x: &mut [f64],
) {
    let in_dim = layer.in_dim();
    let out_dim = layer.out_dim();
    let v_count = topo.num_nodes();
    let mut t = vec![0.0; in_dim];
    let mut d_t = vec![0.0; in_dim];
    let mut d_agg = vec![0.0; v_count * in_dim];
    for v in 0..v_count {
        let dz = &d_z[v * out_dim..(v + 1) * out_dim];
        let xi = &x[v * in_dim..(v + 1) * in_dim];
        let ai = &agg[v * in_dim..(v + 1) * in_dim];
        axpy(1.0, dz, &mut grads.bias);
        match &layer.w_nbr {
            None => {
                for (ti, (a, b)) in t.iter_mut().zip(xi.iter().zip(ai)) {
                    *ti = a + b;
                }
                outer_acc(&mut grads.w_self, dz, &t);
                d_t.fill(0.0);
                matvec_t_acc(&layer.w_self, dz, &mut d_t);
                axpy(1.0, &d_t, &mut d_x[v * in_dim..(v + 1) * in_dim]);
                d_agg[v * in_dim..(v + 1) * in_dim].copy_from_slice(&d_t);
            }
            Some(wn) => {
                outer_acc(&mut grads.w_self, dz, xi);
                outer_acc(grads.w_nbr.as_mut().expect("grads match layer"), dz, ai);
                matvec_t_acc(&layer.w_self, dz, &mut d_x[v * in_dim..(v + 1) * in_dim]);
                matvec_t_acc(wn, dz, &mut d_agg[v * in_dim..(v + 1) * in_dim]);
            }
        }
    }
    // Route aggregation gradients back to the source pilot nodes.
    let scale = match mode {
        Aggregation::Mean => 1.0 / topo.degree() as f64,
        Aggregation::Sum => 1.0,
    };
    for v in 0..v_count {
        let src = &d_agg[v * in_dim..(v + 1) * in_dim];
        for &p in topo.neighbors_of(v) {
            let p = p as usize;
            axpy(scale, src, &mut d_x[p * in_dim..(p + 1) * in_dim]);
        }
    }
}

/// Applies the ReLU gate: `d_z = d_h` where the activation fired, else 0.
fn relu_gate(post_act: &[f64], d_h: &[f64]) -> Vec<f64> {
    post_act
        .iter()
        .zip(d_h)
        .map(|(&h, &g)| if h > 0.0 { g } else { 0.0 })
        .collect()
}

/// Full backward pass: gradients of the loss with respect to every
/// parameter, given the output-side gradients `d_out` (per node feature)
/// and `d_nhat` (noise prediction).
pub fn backward(
    params: &ModelParams,
    topo: &GraphTopology,
    trace: &Trace,
    d_out: &[f64],
    d_nhat: f64,
) -> ModelParams {
    let v_count = topo.num_nodes();
    let h = params.config.hidden_dim;
    let mode = params.config.aggregation;
    let mut grads = ModelParams::zeros_like(&params.config);

    // Noise head.
    grads.noise.b2 += d_nhat;
    axpy(d_nhat, &trace.r6, &mut grads.noise.w2);
    let d_r6: Vec<f64> = params.noise.w2.iter().map(|&w| d_nhat * w).collect();
    let d_z6 = relu_gate(&trace.r6, &d_r6);
    outer_acc(&mut grads.noise.w1, &d_z6, &trace.h_gamma);
    axpy(1.0, &d_z6, &mut grads.noise.b1);
    let mut d_hgamma = vec![0.0; h];
    matvec_t_acc(&params.noise.w1, &d_z6, &mut d_hgamma);

    // Mean pooling spreads the head gradient evenly over all nodes.
    let mut d_h2 = vec![0.0; v_count * h];
    let inv_v = 1.0 / v_count as f64;
    for v in 0..v_count {
        axpy(inv_v, &d_hgamma, &mut d_h2[v * h..(v + 1) * h]);
    }

    // Layer 3 (linear).
    sage_backward(
        &params.layers[2],
        &mut grads.layers[2],
        topo,
        mode,
        &trace.h2,
        &trace.a3,
        d_out,
        &mut d_h2,
    );

    // Layer 2 (ReLU).
    let d_z2 = relu_gate(&trace.h2, &d_h2);
    let mut d_h1 = vec![0.0; v_count * h];
    sage_backward(
        &params.layers[1],
        &mut grads.layers[1],
        topo,
        mode,
        &trace.h1,
        &trace.a2,
        &d_z2,
        &mut d_h1,
    );

    // Layer 1 (ReLU). Input gradients are computed into scratch and dropped.
    let d_z1 = relu_gate(&trace.h1, &d_h1);
    let mut d_x = vec![0.0; v_count * 2];
    sage_backward(
        &params.layers[0],
        &mut grads.layers[0],
        topo,
        mode,
        &trace.x,
        &trace.a1,
        &d_z1,
        &mut d_x,
    );

    grads
}

/// Forward, loss, and gradients for one sample. `label_noise` is expected
/// in scaled label space (`sigma^2 * noise_label_scale`).
pub fn loss_and_grads(
    params: &ModelParams,
    topo: &GraphTopology,
    x: &[f64],
    label_h: &[f64],
    label_noise: f64,
    weights: &LossWeights,
) -> Result<(LossParts, GnnOutput, ModelParams), GnnError> {
    if label_h.len() != x.len() {
        return Err(GnnError::Shape(alloc::format!(
            "label length {} != input length {}",
            label_h.len(),
            x.len()
        )));
    }
    let (output, trace) = forward(params, topo, x)?;
    let parts = loss_parts(&output, label_h, label_noise, weights);
    let v_count = topo.num_nodes() as f64;
    let d_out: Vec<f64> = output
        .h_hat
        .iter()
        .zip(label_h)
        .map(|(o, l)| weights.lambda_ce * 2.0 * (o - l) / v_count)
        .collect();
    let d_nhat = weights.lambda_no * 2.0 * (output.noise_hat - label_noise);
    let grads = backward(params, topo, &trace, &d_out, d_nhat);
    Ok((parts, output, grads))
}

/// Runs the model as a channel estimator: returns the estimated grid and
/// the (non-negative) noise power estimate in physical units.
pub fn estimate_grid(
    params: &ModelParams,
    topo: &GraphTopology,
    features: &[f64],
) -> Result<(ResourceGrid, f64), GnnError> {
    let (output, _) = forward(params, topo, features)?;
    let mut grid = ResourceGrid::zeros(topo.num_subcarriers(), topo.num_symbols());
    for (i, slot) in grid.as_mut_slice().iter_mut().enumerate() {
        *slot = Complex64::new(output.h_hat[2 * i], output.h_hat[2 * i + 1]);
    }
    let sigma2 = (output.noise_hat / params.config.noise_label_scale).max(0.0);
    Ok((grid, sigma2))
}
