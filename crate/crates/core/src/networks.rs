//! Depth and occlusion networks, the two baselines, parameter storage and
//! initialization.
//!
//! Every network is a chain of "same"-padded convolutions, each optionally
//! followed by batch norm and an activation. 2D nets map views `[3, N, H, W]`
//! to per-view channels `[C, N, H, W]`; the occlusion net stacks the V·U
//! views along the depth axis of a 3D convolution.

use lfsynth_tensor::{Graph, NormMode, RunningStats, Scalar, Tensor, Var, BATCH_NORM_EPSILON};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::NamedTensor;
use crate::error::{LfError, Result};
use crate::lightfield::{LightField, RayDepthField, View, CHANNELS, MAX_DISPARITY};
use crate::render::{pack_depths, pack_light_fields, pack_views, unpack_depths, unpack_light_fields};

/// Smallest spatial extent accepted by the view-level forward functions.
pub const MIN_INPUT_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Elu,
    ScaledTanh(f32),
    Tanh,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d { dilation: usize },
    Conv3d,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub channels_in: usize,
    pub channels_out: usize,
    pub activation: Activation,
    pub batch_norm: bool,
    /// Multiplier on the fan-in uniform bound at initialization.
    pub init_gain: f32,
}

impl LayerSpec {
    pub fn weight_shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Conv2d { .. } => vec![self.channels_out, self.channels_in, 3, 3],
            LayerKind::Conv3d => vec![self.channels_out, self.channels_in, 3, 3, 3],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight_shape()[1..].iter().product()
    }
}

/// What a parameter set computes; also the tensor-name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetRole {
    Depth,
    Occlusion,
    Flow,
    Direct,
}

impl NetRole {
    pub fn name(self) -> &'static str {
        match self {
            NetRole::Depth => "depth",
            NetRole::Occlusion => "occlusion",
            NetRole::Flow => "flow",
            NetRole::Direct => "direct",
        }
    }

    fn salt(self) -> u64 {
        match self {
            NetRole::Depth => 0x6465_7074,
            NetRole::Occlusion => 0x6f63_636c,
            NetRole::Flow => 0x666c_6f77,
            NetRole::Direct => 0x6469_7265,
        }
    }
}

/// Channel widths of the hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub name: &'static str,
    /// Hidden widths of the 2D backbone; the output layer is appended.
    pub backbone_widths: Vec<usize>,
    /// One dilation per backbone layer, output layer included.
    pub dilations: Vec<usize>,
    /// Hidden widths of the 3D occlusion net; the RGB output layer is appended.
    pub occlusion_widths: Vec<usize>,
}

impl Architecture {
    pub const NAMES: [&'static str; 3] = ["reference", "desk", "tiny"];

    /// Full-size configuration.
    pub fn reference() -> Self {
        Self {
            name: "reference",
            backbone_widths: vec![16, 32, 64, 128, 128, 128, 128, 64, 64],
            dilations: vec![1, 1, 2, 4, 8, 16, 8, 4, 2, 1],
            occlusion_widths: vec![8, 8, 8, 8],
        }
    }

    /// Scaled down for single-core training at 32×32.
    pub fn desk() -> Self {
        Self {
            name: "desk",
            backbone_widths: vec![8, 16, 16, 16, 16, 16, 16, 16, 16],
            dilations: vec![1, 1, 2, 4, 8, 16, 8, 4, 2, 1],
            occlusion_widths: vec![4, 4, 4, 4],
        }
    }

    /// Minimal widths for gradient checks on toy inputs.
    pub fn tiny() -> Self {
        Self {
            name: "tiny",
            backbone_widths: vec![3, 3],
            dilations: vec![1, 2, 1],
            occlusion_widths: vec![2, 2, 2, 2],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "reference" => Ok(Self::reference()),
            "desk" => Ok(Self::desk()),
            "tiny" => Ok(Self::tiny()),
            _ => Err(LfError::Config(format!(
                "unknown architecture `{name}` (expected one of {:?})",
                Self::NAMES
            ))),
        }
    }
}

fn backbone(arch: &Architecture, out: usize, activation: Activation, gain: f32) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(arch.backbone_widths.len() + 1);
    let mut c_in = CHANNELS;
    for (i, &w) in arch.backbone_widths.iter().enumerate() {
        specs.push(LayerSpec {
            kind: LayerKind::Conv2d {
                dilation: arch.dilations[i],
            },
            channels_in: c_in,
            channels_out: w,
            activation: Activation::Elu,
            batch_norm: true,
            init_gain: 1.0,
        });
        c_in = w;
    }
    specs.push(LayerSpec {
        kind: LayerKind::Conv2d {
            dilation: *arch.dilations.last().unwrap_or(&1),
        },
        channels_in: c_in,
        channels_out: out,
        activation,
        batch_norm: false,
        init_gain: gain,
    });
    specs
}

/// Gain on the depth and flow output layers, so initial disparities start
/// near zero instead of spanning most of the tanh range.
pub const DISPARITY_OUTPUT_GAIN: f32 = 0.1;

pub fn depth_net_spec(arch: &Architecture, v: usize, u: usize) -> Vec<LayerSpec> {
    backbone(arch, v * u, Activation::ScaledTanh(MAX_DISPARITY), DISPARITY_OUTPUT_GAIN)
}

pub fn flow_net_spec(arch: &Architecture, v: usize, u: usize) -> Vec<LayerSpec> {
    backbone(arch, 2 * v * u, Activation::ScaledTanh(MAX_DISPARITY), DISPARITY_OUTPUT_GAIN)
}

pub fn direct_net_spec(arch: &Architecture, v: usize, u: usize) -> Vec<LayerSpec> {
    backbone(arch, CHANNELS * v * u, Activation::Tanh, 1.0)
}

/// 3D CNN over `[rgb + depth]` stacks; the output layer starts at zero.
pub fn occlusion_net_spec(arch: &Architecture) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut c_in = CHANNELS + 1;
    for &w in &arch.occlusion_widths {
        specs.push(LayerSpec {
            kind: LayerKind::Conv3d,
            channels_in: c_in,
            channels_out: w,
            activation: Activation::Elu,
            batch_norm: true,
            init_gain: 1.0,
        });
        c_in = w;
    }
    specs.push(LayerSpec {
        kind: LayerKind::Conv3d,
        channels_in: c_in,
        channels_out: CHANNELS,
        activation: Activation::Tanh,
        batch_norm: false,
        init_gain: 0.0,
    });
    specs
}

/// Layer specs for `role` on a `v × u` grid.
pub fn net_spec(role: NetRole, arch: &Architecture, v: usize, u: usize) -> Vec<LayerSpec> {
    match role {
        NetRole::Depth => depth_net_spec(arch, v, u),
        NetRole::Occlusion => occlusion_net_spec(arch),
        NetRole::Flow => flow_net_spec(arch, v, u),
        NetRole::Direct => direct_net_spec(arch, v, u),
    }
}

fn validate_chain(role: NetRole, specs: &[LayerSpec], angular: (usize, usize)) -> Result<()> {
    let bad = |m: String| Err(LfError::Network(format!("{} net: {m}", role.name())));
    let Some(last) = specs.last() else {
        return bad("empty layer chain".into());
    };
    for w in specs.windows(2) {
        if w[0].channels_out != w[1].channels_in {
            return bad(format!("{} channels feed a layer expecting {}", w[0].channels_out, w[1].channels_in));
        }
    }
    let vu = angular.0 * angular.1;
    let (first_in, last_out, act, three_d) = match role {
        NetRole::Depth => (CHANNELS, vu, Activation::ScaledTanh(MAX_DISPARITY), false),
        NetRole::Flow => (CHANNELS, 2 * vu, Activation::ScaledTanh(MAX_DISPARITY), false),
        NetRole::Direct => (CHANNELS, CHANNELS * vu, Activation::Tanh, false),
        NetRole::Occlusion => (CHANNELS + 1, CHANNELS, Activation::Tanh, true),
    };
    if specs[0].channels_in != first_in {
        return bad(format!("input has {} channels, expected {first_in}", specs[0].channels_in));
    }
    if last.channels_out != last_out || last.activation != act || last.batch_norm {
        return bad(format!("output layer must emit {last_out} channels through {act:?} without batch norm"));
    }
    for s in specs {
        let ok = match s.kind {
            LayerKind::Conv2d { dilation } => !three_d && dilation >= 1,
            LayerKind::Conv3d => three_d,
        };
        if !ok || s.channels_in == 0 || s.channels_out == 0 || !s.init_gain.is_finite() {
            return bad(format!("invalid layer {s:?}"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormParams<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub stats: RunningStats<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub norm: Option<NormParams<T>>,
}

/// Parameters of one network: per layer weights, bias and, with batch
/// norm, gamma, beta and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f32> {
    pub role: NetRole,
    pub angular: (usize, usize),
    pub specs: Vec<LayerSpec>,
    pub layers: Vec<LayerParams<T>>,
    pub seed: u64,
}

/// Draws weights from `U(-g/√fan_in, g/√fan_in)`; biases and beta start
/// at zero, gamma at one.
pub fn init_params(role: NetRole, specs: Vec<LayerSpec>, angular: (usize, usize), seed: u64) -> Result<ModelParams<f32>> {
    validate_chain(role, &specs, angular)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ role.salt());
    let layers = specs
        .iter()
        .map(|s| {
            let bound = s.init_gain / (s.fan_in() as f32).sqrt();
            let shape = s.weight_shape();
            let weight = Tensor::from_fn(shape, |_| {
                let r: f32 = rng.random_range(-1.0..1.0);
                r * bound
            });
            let c = s.channels_out;
            LayerParams {
                weight,
                bias: Tensor::zeros([c]),
                norm: s.batch_norm.then(|| NormParams {
                    gamma: Tensor::full([c], 1.0),
                    beta: Tensor::zeros([c]),
                    stats: RunningStats::new(c),
                }),
            }
        })
        .collect();
    Ok(ModelParams {
        role,
        angular,
        specs,
        layers,
        seed,
    })
}

/// Convenience: specs from an architecture, then [`init_params`].
pub fn init_net(role: NetRole, arch: &Architecture, angular: (usize, usize), seed: u64) -> Result<ModelParams<f32>> {
    init_params(role, net_spec(role, arch, angular.0, angular.1), angular, seed)
}

/// Graph handles of one layer's trainable tensors.
#[derive(Debug, Clone, Copy)]
pub struct BoundLayer {
    pub weight: Var,
    pub bias: Var,
    pub gamma: Option<Var>,
    pub beta: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct BoundParams {
    pub layers: Vec<BoundLayer>,
}

impl<T: Scalar> ModelParams<T> {
    /// Trainable tensors in a fixed order: per layer weight, bias, gamma, beta.
    pub fn trainable(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(&l.weight);
            out.push(&l.bias);
            if let Some(n) = &l.norm {
                out.push(&n.gamma);
                out.push(&n.beta);
            }
        }
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.weight.data_mut());
            out.push(l.bias.data_mut());
            if let Some(n) = &mut l.norm {
                out.push(n.gamma.data_mut());
                out.push(n.beta.data_mut());
            }
        }
        out
    }

    pub fn trainable_sizes(&self) -> Vec<usize> {
        self.trainable().iter().map(|t| t.len()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.trainable_sizes().iter().sum()
    }

    /// Adds the trainable tensors to `g`, as parameters or as constants.
    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> BoundParams {
        let mut put = |t: &Tensor<T>| g.leaf(t.clone(), trainable);
        let layers = self
            .layers
            .iter()
            .map(|l| BoundLayer {
                weight: put(&l.weight),
                bias: put(&l.bias),
                gamma: l.norm.as_ref().map(|n| put(&n.gamma)),
                beta: l.norm.as_ref().map(|n| put(&n.beta)),
            })
            .collect();
        BoundParams { layers }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let c = |t: &Tensor<T>| t.cast::<U>();
        ModelParams {
            role: self.role,
            angular: self.angular,
            specs: self.specs.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    weight: c(&l.weight),
                    bias: c(&l.bias),
                    norm: l.norm.as_ref().map(|n| NormParams {
                        gamma: c(&n.gamma),
                        beta: c(&n.beta),
                        stats: n.stats.cast(),
                    }),
                })
                .collect(),
            seed: self.seed,
        }
    }

    /// Applies the layer chain to `input`.
    pub fn run_chain(&mut self, g: &mut Graph<T>, bound: &BoundParams, input: Var, mode: NormMode) -> Result<Var> {
        let mut x = input;
        for (i, spec) in self.specs.iter().enumerate() {
            let b = bound.layers[i];
            x = match spec.kind {
                LayerKind::Conv2d { dilation } => g.conv2d(x, b.weight, b.bias, dilation)?,
                LayerKind::Conv3d => g.conv3d(x, b.weight, b.bias)?,
            };
            if let (Some(norm), Some(gamma), Some(beta)) = (self.layers[i].norm.as_mut(), b.gamma, b.beta) {
                let eps = T::from_f64_lossy(BATCH_NORM_EPSILON);
                x = g.batch_norm(x, gamma, beta, &mut norm.stats, mode, eps)?;
            }
            x = match spec.activation {
                Activation::Elu => g.elu(x),
                Activation::Tanh => g.tanh(x),
                Activation::ScaledTanh(s) => g.scaled_tanh(x, T::from_f64_lossy(s as f64))?,
                Activation::Identity => x,
            };
        }
        Ok(x)
    }
}

impl BoundParams {
    /// Gradients in [`ModelParams::trainable`] order; zeros where the loss
    /// does not reach a tensor.
    pub fn grads<T: Scalar>(&self, g: &Graph<T>) -> Vec<Vec<T>> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(g.grad_or_zeros(l.weight));
            out.push(g.grad_or_zeros(l.bias));
            if let (Some(gm), Some(bt)) = (l.gamma, l.beta) {
                out.push(g.grad_or_zeros(gm));
                out.push(g.grad_or_zeros(bt));
            }
        }
        out
    }
}

impl ModelParams<f32> {
    /// One group of named tensors per layer, for checkpointing.
    pub fn to_groups(&self) -> Vec<Vec<NamedTensor>> {
        let prefix = self.role.name();
        let named = |i: usize, what: &str, t: &Tensor<f32>| {
            NamedTensor::new(format!("{prefix}.{i}.{what}"), t.shape().to_vec(), t.data().to_vec())
        };
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut group = vec![named(i, "weight", &l.weight), named(i, "bias", &l.bias)];
                if let Some(n) = &l.norm {
                    group.push(named(i, "gamma", &n.gamma));
                    group.push(named(i, "beta", &n.beta));
                    if n.stats.initialized {
                        let c = n.stats.channels();
                        group.push(NamedTensor::new(format!("{prefix}.{i}.running_mean"), vec![c], n.stats.mean.clone()));
                        group.push(NamedTensor::new(format!("{prefix}.{i}.running_var"), vec![c], n.stats.var.clone()));
                    }
                }
                group
            })
            .collect()
    }

    /// Overwrites every tensor from `groups`, checking names and shapes
    /// against this parameter set.
    pub fn load_groups(&mut self, groups: &[Vec<NamedTensor>]) -> Result<()> {
        let prefix = self.role.name();
        if groups.len() != self.layers.len() {
            return Err(LfError::Network(format!(
                "{prefix} net has {} layers, checkpoint section has {}",
                self.layers.len(),
                groups.len()
            )));
        }
        for (i, (layer, group)) in self.layers.iter_mut().zip(groups).enumerate() {
            let mut tensors = group.iter();
            let mut next = |what: &str, shape: &[usize]| -> Result<Vec<f32>> {
                let name = format!("{prefix}.{i}.{what}");
                let t = tensors
                    .next()
                    .ok_or_else(|| LfError::Network(format!("checkpoint is missing {name}")))?;
                if t.name != name {
                    return Err(LfError::Network(format!("expected tensor {name}, found {}", t.name)));
                }
                if t.shape != shape {
                    return Err(LfError::Network(format!("{name} has shape {:?}, expected {shape:?}", t.shape)));
                }
                Ok(t.data.clone())
            };
            let weight = next("weight", layer.weight.shape())?;
            let bias = next("bias", layer.bias.shape())?;
            let norm = match &layer.norm {
                Some(n) => {
                    let c = n.stats.channels();
                    let gamma = next("gamma", &[c])?;
                    let beta = next("beta", &[c])?;
                    let stats = if group.len() == 6 {
                        RunningStats {
                            mean: next("running_mean", &[c])?,
                            var: next("running_var", &[c])?,
                            initialized: true,
                        }
                    } else {
                        RunningStats::new(c)
                    };
                    Some((gamma, beta, stats))
                }
                None => None,
            };
            let expected = if layer.norm.is_some() { [4, 6].as_slice() } else { [2].as_slice() };
            if !expected.contains(&group.len()) {
                return Err(LfError::Network(format!(
                    "layer {prefix}.{i} has {} tensors in the checkpoint",
                    group.len()
                )));
            }
            layer.weight.data_mut().copy_from_slice(&weight);
            layer.bias.data_mut().copy_from_slice(&bias);
            if let (Some(n), Some((gamma, beta, stats))) = (layer.norm.as_mut(), norm) {
                n.gamma.data_mut().copy_from_slice(&gamma);
                n.beta.data_mut().copy_from_slice(&beta);
                n.stats = stats;
            }
        }
        Ok(())
    }
}

fn role_check<T>(params: &ModelParams<T>, role: NetRole) -> Result<()> {
    if params.role != role {
        return Err(LfError::Network(format!(
            "{} parameters passed where a {} net is expected",
            params.role.name(),
            role.name()
        )));
    }
    Ok(())
}

/// `[C·?, N, H, W]` network output reordered to `[N, C, H, W]`.
fn batch_major<T: Scalar>(g: &mut Graph<T>, x: Var) -> Result<Var> {
    Ok(g.permute(x, &[1, 0, 2, 3])?)
}

/// Depth net: views `[3, N, H, W]` → ray depths `[N, V, U, H, W]`.
pub fn depth_net_graph<T: Scalar>(
    g: &mut Graph<T>,
    params: &mut ModelParams<T>,
    bound: &BoundParams,
    views: Var,
    mode: NormMode,
) -> Result<Var> {
    role_check(params, NetRole::Depth)?;
    let (v, u) = params.angular;
    let out = params.run_chain(g, bound, views, mode)?;
    let out = batch_major(g, out)?;
    let s = g.shape(out).to_vec();
    Ok(g.reshape(out, &[s[0], v, u, s[2], s[3]])?)
}

/// Occlusion net: residual correction of the Lambertian light field
/// `[3, N, V, U, H, W]` given the ray depths `[N, V, U, H, W]`.
pub fn occlusion_net_graph<T: Scalar>(
    g: &mut Graph<T>,
    params: &mut ModelParams<T>,
    bound: &BoundParams,
    lambertian: Var,
    depths: Var,
    mode: NormMode,
) -> Result<Var> {
    role_check(params, NetRole::Occlusion)?;
    let ls = g.shape(lambertian).to_vec();
    let ds = g.shape(depths).to_vec();
    if ls.len() != 6 || ls[0] != CHANNELS || ds != ls[1..] {
        return Err(LfError::ExtentMismatch(format!(
            "occlusion net inputs {ls:?} and {ds:?} do not match"
        )));
    }
    let (n, s, h, w) = (ls[1], ls[2] * ls[3], ls[4], ls[5]);
    let stacked = g.reshape(lambertian, &[CHANNELS, n, s, h, w])?;
    let d = g.reshape(depths, &[1, n, s, h, w])?;
    let input = g.concat(&[stacked, d], 0)?;
    let residual = params.run_chain(g, bound, input, mode)?;
    let residual = g.reshape(residual, &ls)?;
    Ok(g.add(residual, lambertian)?)
}

/// Samples views `[3, N, H, W]` at the base grid displaced by `flows`
/// `[2, N, V, U, H, W]` (row flow first).
pub fn warp_by_flow_graph<T: Scalar>(g: &mut Graph<T>, views: Var, flows: Var) -> Result<Var> {
    let fs = g.shape(flows).to_vec();
    if fs.len() != 6 || fs[0] != 2 {
        return Err(LfError::ExtentMismatch(format!("flows {fs:?} must be [2, N, V, U, H, W]")));
    }
    let (h, w) = (fs[4], fs[5]);
    let per = fs[1..].iter().product::<usize>();
    let grid = Tensor::from_fn(fs.clone(), |i| {
        let (axis, r) = (i / per, i % per);
        let p = r % (h * w);
        T::from_usize(if axis == 0 { p / w } else { p % w }).unwrap()
    });
    let grid = g.constant(grid);
    let coords = g.add(grid, flows)?;
    Ok(g.grid_sample_bilinear(views, coords)?)
}

/// Flow baseline: independent row and column flow per view, no geometry.
pub fn flow_net_graph<T: Scalar>(
    g: &mut Graph<T>,
    params: &mut ModelParams<T>,
    bound: &BoundParams,
    views: Var,
    mode: NormMode,
) -> Result<Var> {
    role_check(params, NetRole::Flow)?;
    let (v, u) = params.angular;
    let out = params.run_chain(g, bound, views, mode)?;
    let s = g.shape(out).to_vec();
    let flows = g.reshape(out, &[2, v, u, s[1], s[2], s[3]])?;
    let flows = g.permute(flows, &[0, 3, 1, 2, 4, 5])?;
    warp_by_flow_graph(g, views, flows)
}

/// Direct regression baseline: every view's pixels straight from the net.
pub fn direct_net_graph<T: Scalar>(
    g: &mut Graph<T>,
    params: &mut ModelParams<T>,
    bound: &BoundParams,
    views: Var,
    mode: NormMode,
) -> Result<Var> {
    role_check(params, NetRole::Direct)?;
    let (v, u) = params.angular;
    let out = params.run_chain(g, bound, views, mode)?;
    let s = g.shape(out).to_vec();
    let lf = g.reshape(out, &[CHANNELS, v, u, s[1], s[2], s[3]])?;
    Ok(g.permute(lf, &[0, 3, 1, 2, 4, 5])?)
}

fn check_input(view: &View) -> Result<()> {
    if view.height() < MIN_INPUT_SIZE || view.width() < MIN_INPUT_SIZE {
        return Err(LfError::Network(format!(
            "input view {}x{} is smaller than {MIN_INPUT_SIZE}x{MIN_INPUT_SIZE}",
            view.height(),
            view.width()
        )));
    }
    Ok(())
}

fn single_view_pass<R>(
    view: &View,
    params: &mut ModelParams<f32>,
    mode: NormMode,
    f: impl FnOnce(&mut Graph<f32>, &mut ModelParams<f32>, &BoundParams, Var, NormMode) -> Result<Var>,
    unpack: impl FnOnce(&Tensor<f32>) -> Result<R>,
) -> Result<R> {
    check_input(view)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let x = g.constant(pack_views(&[view])?);
    let out = f(&mut g, params, &bound, x, mode)?;
    unpack(g.value(out))
}

/// Ray depths of every view of the light field implied by `view`.
pub fn depth_net_forward(view: &View, params: &mut ModelParams<f32>, mode: NormMode) -> Result<RayDepthField> {
    single_view_pass(view, params, mode, depth_net_graph, |t| Ok(unpack_depths(t)?.remove(0)))
}

/// Lambertian light field plus the predicted occlusion residual.
pub fn occlusion_net_forward(
    lambertian: &LightField,
    depths: &RayDepthField,
    params: &mut ModelParams<f32>,
    mode: NormMode,
) -> Result<LightField> {
    if lambertian.extents() != depths.extents() {
        return Err(LfError::ExtentMismatch(format!(
            "light field {} vs depths {}",
            lambertian.extents(),
            depths.extents()
        )));
    }
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let lr = g.constant(pack_light_fields(&[lambertian])?);
    let d = g.constant(pack_depths(&[depths])?);
    let out = occlusion_net_graph(&mut g, params, &bound, lr, d, mode)?;
    Ok(unpack_light_fields(g.value(out))?.remove(0))
}

pub fn flow_baseline_forward(view: &View, params: &mut ModelParams<f32>, mode: NormMode) -> Result<LightField> {
    single_view_pass(view, params, mode, flow_net_graph, |t| Ok(unpack_light_fields(t)?.remove(0)))
}

pub fn direct_regression_forward(view: &View, params: &mut ModelParams<f32>, mode: NormMode) -> Result<LightField> {
    single_view_pass(view, params, mode, direct_net_graph, |t| Ok(unpack_light_fields(t)?.remove(0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architectures_build_valid_chains() {
        for name in Architecture::NAMES {
            let arch = Architecture::by_name(name).unwrap();
            for role in [NetRole::Depth, NetRole::Occlusion, NetRole::Flow, NetRole::Direct] {
                init_net(role, &arch, (3, 2), 1).unwrap();
            }
        }
        assert!(Architecture::by_name("huge").is_err());
    }

    #[test]
    fn reference_depth_net_matches_declared_layout() {
        let specs = depth_net_spec(&Architecture::reference(), 8, 8);
        let widths: Vec<usize> = specs.iter().map(|s| s.channels_out).collect();
        assert_eq!(widths, [16, 32, 64, 128, 128, 128, 128, 64, 64, 64]);
        let dil: Vec<usize> = specs
            .iter()
            .map(|s| match s.kind {
                LayerKind::Conv2d { dilation } => dilation,
                LayerKind::Conv3d => 0,
            })
            .collect();
        assert_eq!(dil, [1, 1, 2, 4, 8, 16, 8, 4, 2, 1]);
        assert!(specs[..9].iter().all(|s| s.batch_norm && s.activation == Activation::Elu));
        assert_eq!(specs[9].activation, Activation::ScaledTanh(16.0));
        assert!(!specs[9].batch_norm);
        let occ = occlusion_net_spec(&Architecture::reference());
        assert_eq!(occ.len(), 5);
        assert!(occ.iter().all(|s| s.kind == LayerKind::Conv3d));
    }

    #[test]
    fn broken_chains_are_rejected() {
        let arch = Architecture::tiny();
        let mut specs = depth_net_spec(&arch, 2, 2);
        specs[1].channels_in += 1;
        assert!(init_params(NetRole::Depth, specs, (2, 2), 0).is_err());
        let mut specs = depth_net_spec(&arch, 2, 2);
        specs.last_mut().unwrap().activation = Activation::Tanh;
        assert!(init_params(NetRole::Depth, specs, (2, 2), 0).is_err());
        let specs = depth_net_spec(&arch, 2, 2);
        assert!(init_params(NetRole::Depth, specs, (3, 2), 0).is_err());
    }

    #[test]
    fn role_mismatch_is_rejected() {
        let arch = Architecture::tiny();
        let mut occ = init_net(NetRole::Occlusion, &arch, (2, 2), 0).unwrap();
        let mut g = Graph::new();
        let bound = occ.bind(&mut g, false);
        let x = g.constant(Tensor::zeros([3, 1, 4, 4]));
        assert!(depth_net_graph(&mut g, &mut occ, &bound, x, NormMode::Train).is_err());
    }
}
