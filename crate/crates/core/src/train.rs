//! End-to-end training: configuration, example sampling, the optimization
//! step and resumable checkpoints.

use std::fmt::Write as _;
use std::path::Path;

use lfsynth_tensor::{Adam, AdamState, Graph, NormMode, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::checkpoint::{encode_lfck, put_tensor, read_lfck, Cursor, NamedTensor};
use crate::error::{io_err, LfError, Result};
use crate::lightfield::{Extents, LightField, RayDepthField, View, CHANNELS};
use crate::networks::{
    depth_net_graph, direct_net_graph, flow_net_graph, init_net, occlusion_net_graph, Architecture, ModelParams,
    NetRole,
};
use crate::render::{pack_light_fields, pack_views, render_lambertian_graph, total_loss_graph, LossBreakdown};

/// Which model family is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Depth net, Lambertian rendering and occlusion net.
    Ours,
    /// Per-view flow baseline.
    Flow,
    /// Direct pixel regression baseline.
    Direct,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Flow => "flow",
            Method::Direct => "direct",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = LfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Method::Ours),
            "flow" => Ok(Method::Flow),
            "direct" => Ok(Method::Direct),
            _ => Err(LfError::Config(format!("unknown method `{s}` (ours|flow|direct)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub lambda_c: f64,
    pub lambda_tv: f64,
    pub crop: usize,
    pub downsample_to: usize,
    pub steps: u64,
    pub seed: u64,
    pub precision: Precision,
    pub architecture: String,
    pub method: Method,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 4,
            lambda_c: 0.005,
            lambda_tv: 0.01,
            crop: 192,
            downsample_to: 96,
            steps: 2000,
            seed: 0,
            precision: Precision::Single,
            architecture: "reference".into(),
            method: Method::Ours,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 14] = [
        "lr",
        "beta1",
        "beta2",
        "epsilon",
        "batch_size",
        "lambda_c",
        "lambda_tv",
        "crop",
        "downsample_to",
        "steps",
        "seed",
        "precision",
        "architecture",
        "method",
    ];

    /// Single-core settings: 64-pixel crops trained at 32×32 on the desk nets.
    pub fn desk() -> Self {
        Self {
            crop: 64,
            downsample_to: 32,
            architecture: "desk".into(),
            ..Self::default()
        }
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| LfError::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "lr" => self.lr = num(key, value)?,
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "lambda_c" => self.lambda_c = num(key, value)?,
            "lambda_tv" => self.lambda_tv = num(key, value)?,
            "crop" => self.crop = num(key, value)?,
            "downsample_to" => self.downsample_to = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "precision" => self.precision = value.parse().map_err(LfError::Config)?,
            "architecture" => {
                Architecture::by_name(value)?;
                self.architecture = value.to_string();
            }
            "method" => self.method = value.parse()?,
            _ => return Err(LfError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LfError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(LfError::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
            seen.push(key);
            config
                .set(key, value.trim())
                .map_err(|e| LfError::Config(format!("line {}: {e}", n + 1)))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    /// Canonical text form; [`TrainConfig::parse`] inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "beta1 = {}", self.beta1);
        let _ = writeln!(s, "beta2 = {}", self.beta2);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "lambda_c = {}", self.lambda_c);
        let _ = writeln!(s, "lambda_tv = {}", self.lambda_tv);
        let _ = writeln!(s, "crop = {}", self.crop);
        let _ = writeln!(s, "downsample_to = {}", self.downsample_to);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "precision = {}", self.precision.name());
        let _ = writeln!(s, "architecture = {}", self.architecture);
        let _ = writeln!(s, "method = {}", self.method.name());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(LfError::Config(m));
        if self.crop != 2 * self.downsample_to || self.downsample_to == 0 {
            return fail(format!(
                "crop ({}) must be twice downsample_to ({})",
                self.crop, self.downsample_to
            ));
        }
        if !(self.lambda_c >= 0.0 && self.lambda_tv >= 0.0) {
            return fail("lambda_c and lambda_tv must be >= 0".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.epsilon > 0.0) {
            return fail("lr and epsilon must be > 0".into());
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return fail("beta1 and beta2 must lie in [0, 1)".into());
        }
        Architecture::by_name(&self.architecture)?;
        Ok(())
    }

    pub fn adam(&self) -> Adam {
        Adam {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Input view and target light field of one training example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub input: View,
    pub target: LightField,
}

/// Spatial window `[y0, y0 + size) × [x0, x0 + size)` of every view.
pub fn crop_light_field(lf: &LightField, y0: usize, x0: usize, size: usize) -> Result<LightField> {
    let e = lf.extents();
    if y0 + size > e.y || x0 + size > e.x || size == 0 {
        return Err(LfError::ExtentMismatch(format!(
            "crop {size} at ({y0}, {x0}) does not fit {e}"
        )));
    }
    LightField::from_fn(e.with_spatial(size, size), |iv, iu, y, x, c| lf.get(iv, iu, y0 + y, x0 + x, c))
}

/// 2×2 box average of every view.
pub fn downsample_box(lf: &LightField) -> Result<LightField> {
    let e = lf.extents();
    if e.y % 2 != 0 || e.x % 2 != 0 {
        return Err(LfError::ExtentMismatch(format!("cannot halve odd extents {e}")));
    }
    LightField::from_fn(e.with_spatial(e.y / 2, e.x / 2), |iv, iu, y, x, c| {
        let s = lf.get(iv, iu, 2 * y, 2 * x, c)
            + lf.get(iv, iu, 2 * y, 2 * x + 1, c)
            + lf.get(iv, iu, 2 * y + 1, 2 * x, c)
            + lf.get(iv, iu, 2 * y + 1, 2 * x + 1, c);
        s * 0.25
    })
}

/// Ray depths at half resolution: 2×2 box average, disparities halved.
pub fn downsample_depths(depths: &RayDepthField) -> Result<RayDepthField> {
    let e = depths.extents();
    if e.y % 2 != 0 || e.x % 2 != 0 {
        return Err(LfError::ExtentMismatch(format!("cannot halve odd extents {e}")));
    }
    RayDepthField::from_fn(e.with_spatial(e.y / 2, e.x / 2), |iv, iu, y, x| {
        let s = depths.get(iv, iu, 2 * y, 2 * x)
            + depths.get(iv, iu, 2 * y, 2 * x + 1)
            + depths.get(iv, iu, 2 * y + 1, 2 * x)
            + depths.get(iv, iu, 2 * y + 1, 2 * x + 1);
        s * 0.125
    })
}

/// Per-ray mask at half resolution: set where all four source rays are set.
pub fn downsample_mask(extents: Extents, mask: &[bool]) -> Vec<bool> {
    let (h, w) = (extents.y / 2, extents.x / 2);
    let mut out = Vec::with_capacity(extents.views() * h * w);
    for iv in 0..extents.v {
        for iu in 0..extents.u {
            for y in 0..h {
                for x in 0..w {
                    let at = |yy, xx| mask[extents.ray_index(iv, iu, yy, xx)];
                    out.push(at(2 * y, 2 * x) && at(2 * y, 2 * x + 1) && at(2 * y + 1, 2 * x) && at(2 * y + 1, 2 * x + 1));
                }
            }
        }
    }
    out
}

fn example_from(lf: &LightField, y0: usize, x0: usize, crop: usize, downsample_to: usize) -> Result<TrainingExample> {
    if crop != 2 * downsample_to {
        return Err(LfError::Config(format!("crop {crop} must be twice downsample_to {downsample_to}")));
    }
    let target = downsample_box(&crop_light_field(lf, y0, x0, crop)?)?;
    Ok(TrainingExample {
        input: target.central_view(),
        target,
    })
}

/// Uniformly placed `crop × crop` window of all views, halved by box averaging.
pub fn make_training_example(
    lf: &LightField,
    crop: usize,
    downsample_to: usize,
    rng: &mut impl Rng,
) -> Result<TrainingExample> {
    let e = lf.extents();
    if e.y < crop || e.x < crop {
        return Err(LfError::ExtentMismatch(format!(
            "light field {e} is smaller than the {crop}-pixel crop"
        )));
    }
    let y0 = rng.random_range(0..=e.y - crop);
    let x0 = rng.random_range(0..=e.x - crop);
    example_from(lf, y0, x0, crop, downsample_to)
}

/// Centered crop, for deterministic evaluation.
pub fn center_example(lf: &LightField, crop: usize, downsample_to: usize) -> Result<TrainingExample> {
    let e = lf.extents();
    if e.y < crop || e.x < crop {
        return Err(LfError::ExtentMismatch(format!(
            "light field {e} is smaller than the {crop}-pixel crop"
        )));
    }
    example_from(lf, (e.y - crop) / 2, (e.x - crop) / 2, crop, downsample_to)
}

/// The networks trained by one run.
#[derive(Debug, Clone, PartialEq)]
pub enum Models {
    Ours {
        depth: ModelParams,
        occlusion: ModelParams,
    },
    Flow(ModelParams),
    Direct(ModelParams),
}

impl Models {
    pub fn new(method: Method, arch: &Architecture, angular: (usize, usize), seed: u64) -> Result<Self> {
        Ok(match method {
            Method::Ours => Models::Ours {
                depth: init_net(NetRole::Depth, arch, angular, seed)?,
                occlusion: init_net(NetRole::Occlusion, arch, angular, seed)?,
            },
            Method::Flow => Models::Flow(init_net(NetRole::Flow, arch, angular, seed)?),
            Method::Direct => Models::Direct(init_net(NetRole::Direct, arch, angular, seed)?),
        })
    }

    pub fn method(&self) -> Method {
        match self {
            Models::Ours { .. } => Method::Ours,
            Models::Flow(_) => Method::Flow,
            Models::Direct(_) => Method::Direct,
        }
    }

    pub fn nets(&self) -> Vec<&ModelParams> {
        match self {
            Models::Ours { depth, occlusion } => vec![depth, occlusion],
            Models::Flow(p) | Models::Direct(p) => vec![p],
        }
    }

    fn nets_mut(&mut self) -> Vec<&mut ModelParams> {
        match self {
            Models::Ours { depth, occlusion } => vec![depth, occlusion],
            Models::Flow(p) | Models::Direct(p) => vec![p],
        }
    }

    pub fn trainable_sizes(&self) -> Vec<usize> {
        self.nets().iter().flat_map(|n| n.trainable_sizes()).collect()
    }

    pub fn to_groups(&self) -> Vec<Vec<NamedTensor>> {
        self.nets().iter().flat_map(|n| n.to_groups()).collect()
    }

    pub fn load_groups(&mut self, groups: &[Vec<NamedTensor>]) -> Result<()> {
        let total: usize = self.nets().iter().map(|n| n.layers.len()).sum();
        if groups.len() != total {
            return Err(LfError::Network(format!(
                "checkpoint holds {} layers, the {} models have {total}",
                groups.len(),
                self.method().name()
            )));
        }
        let mut rest = groups;
        for net in self.nets_mut() {
            let (head, tail) = rest.split_at(net.layers.len());
            net.load_groups(head)?;
            rest = tail;
        }
        Ok(())
    }
}

/// Everything besides the parameters that a resumed run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub step: u64,
    pub adam: AdamState<f32>,
    pub rng: ChaCha8Rng,
    /// Exponential moving average of the loss terms.
    pub loss_ema: Option<LossBreakdown>,
}

/// Weight of the newest step in [`TrainState::loss_ema`].
pub const LOSS_EMA_WEIGHT: f64 = 0.05;

impl TrainState {
    fn record(&mut self, l: &LossBreakdown) {
        self.loss_ema = Some(match self.loss_ema {
            None => *l,
            Some(e) => {
                let mix = |a: f64, b: f64| (1.0 - LOSS_EMA_WEIGHT) * a + LOSS_EMA_WEIGHT * b;
                LossBreakdown {
                    lambertian_l1: mix(e.lambertian_l1, l.lambertian_l1),
                    predicted_l1: mix(e.predicted_l1, l.predicted_l1),
                    consistency: mix(e.consistency, l.consistency),
                    tv: mix(e.tv, l.tv),
                    total: mix(e.total, l.total),
                }
            }
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub losses: LossBreakdown,
    /// Euclidean norm of the full gradient before the update.
    pub grad_norm: f64,
}

/// One forward/backward pass over `batch` and one Adam update of all
/// networks. Baselines report their reconstruction error as `predicted_l1`
/// and `total`.
pub fn train_step(
    batch: &[TrainingExample],
    models: &mut Models,
    state: &mut TrainState,
    config: &TrainConfig,
) -> Result<StepReport> {
    if batch.len() != config.batch_size {
        return Err(LfError::Config(format!(
            "batch of {} examples, config expects {}",
            batch.len(),
            config.batch_size
        )));
    }
    if config.precision != Precision::Single {
        return Err(LfError::Config("training runs in single precision only".into()));
    }
    let mut g = Graph::<f32>::new();
    let inputs: Vec<&View> = batch.iter().map(|b| &b.input).collect();
    let targets: Vec<&LightField> = batch.iter().map(|b| &b.target).collect();
    let views = g.constant(pack_views(&inputs)?);
    let target = g.constant(pack_light_fields(&targets)?);
    let mode = NormMode::Train;

    let (losses, total, bounds) = match models {
        Models::Ours { depth, occlusion } => {
            let bd = depth.bind(&mut g, true);
            let bo = occlusion.bind(&mut g, true);
            let d = depth_net_graph(&mut g, depth, &bd, views, mode)?;
            let lr = render_lambertian_graph(&mut g, views, d)?;
            let lhat = occlusion_net_graph(&mut g, occlusion, &bo, lr, d, mode)?;
            let vars = total_loss_graph(&mut g, lr, lhat, target, d, config.lambda_c, config.lambda_tv)?;
            (vars.values(&g), vars.total, vec![bd, bo])
        }
        Models::Flow(p) | Models::Direct(p) => {
            let b = p.bind(&mut g, true);
            let pred = match p.role {
                NetRole::Flow => flow_net_graph(&mut g, p, &b, views, mode)?,
                _ => direct_net_graph(&mut g, p, &b, views, mode)?,
            };
            let loss = g.l1_loss(pred, target)?;
            let v = g.item(loss) as f64;
            let losses = LossBreakdown {
                predicted_l1: v,
                total: v,
                ..LossBreakdown::default()
            };
            (losses, loss, vec![b])
        }
    };
    if let Some((term, value)) = losses.non_finite() {
        return Err(LfError::NonFinite {
            step: state.step,
            term,
            value,
        });
    }
    g.backward(total)?;
    let grads: Vec<Vec<f32>> = bounds.iter().flat_map(|b| b.grads(&g)).collect();
    let grad_norm = grads
        .iter()
        .flatten()
        .map(|&v| (v as f64) * (v as f64))
        .sum::<f64>()
        .sqrt();
    if !grad_norm.is_finite() {
        return Err(LfError::NonFinite {
            step: state.step,
            term: "gradient norm",
            value: grad_norm,
        });
    }
    let grad_refs: Vec<&[f32]> = grads.iter().map(Vec::as_slice).collect();
    let mut params: Vec<&mut [f32]> = models.nets_mut().into_iter().flat_map(|n| n.trainable_mut()).collect();
    config.adam().step(&mut params, &grad_refs, &mut state.adam);
    state.step += 1;
    state.record(&losses);
    Ok(StepReport { losses, grad_norm })
}

const TRAILER_MAGIC: &[u8; 4] = b"LFTS";
const TRAILER_VERSION: u16 = 1;

/// A training run: configuration, networks and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub config: TrainConfig,
    pub models: Models,
    pub state: TrainState,
    pub angular: (usize, usize),
    /// Identifier of the training data, carried into checkpoints.
    pub manifest_id: String,
}

impl Trainer {
    pub fn new(config: TrainConfig, angular: (usize, usize), manifest_id: impl Into<String>) -> Result<Self> {
        config.validate()?;
        if config.precision != Precision::Single {
            return Err(LfError::Config(
                "training runs in single precision; double is for inference and gradient checks".into(),
            ));
        }
        let arch = Architecture::by_name(&config.architecture)?;
        let models = Models::new(config.method, &arch, angular, config.seed)?;
        let state = TrainState {
            step: 0,
            adam: AdamState::new(models.trainable_sizes()),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            loss_ema: None,
        };
        Ok(Self {
            config,
            models,
            state,
            angular,
            manifest_id: manifest_id.into(),
        })
    }

    /// Draws `batch_size` examples; scene choice and crop come from the run's rng.
    pub fn sample_batch(&mut self, dataset: &[LightField]) -> Result<Vec<TrainingExample>> {
        if dataset.is_empty() {
            return Err(LfError::Config("empty training set".into()));
        }
        (0..self.config.batch_size)
            .map(|_| {
                let i = self.state.rng.random_range(0..dataset.len());
                make_training_example(&dataset[i], self.config.crop, self.config.downsample_to, &mut self.state.rng)
            })
            .collect()
    }

    pub fn step(&mut self, dataset: &[LightField]) -> Result<StepReport> {
        let batch = self.sample_batch(dataset)?;
        train_step(&batch, &mut self.models, &mut self.state, &self.config)
    }

    /// Trains until `config.steps` steps have been taken, calling `progress`
    /// after each one.
    pub fn run(&mut self, dataset: &[LightField], mut progress: impl FnMut(u64, &StepReport)) -> Result<()> {
        if let Some(lf) = dataset.iter().find(|lf| (lf.extents().v, lf.extents().u) != self.angular) {
            return Err(LfError::ExtentMismatch(format!(
                "training light field {} does not match the {}x{} angular grid",
                lf.extents(),
                self.angular.0,
                self.angular.1
            )));
        }
        while self.state.step < self.config.steps {
            let report = self.step(dataset)?;
            progress(self.state.step, &report);
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = encode_lfck(&self.models.to_groups());
        out.extend_from_slice(TRAILER_MAGIC);
        out.extend_from_slice(&TRAILER_VERSION.to_le_bytes());
        let config = self.config.to_text();
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&(self.manifest_id.len() as u16).to_le_bytes());
        out.extend_from_slice(self.manifest_id.as_bytes());
        out.extend_from_slice(&(self.angular.0 as u32).to_le_bytes());
        out.extend_from_slice(&(self.angular.1 as u32).to_le_bytes());
        out.extend_from_slice(&self.state.step.to_le_bytes());
        out.extend_from_slice(&self.state.rng.get_seed());
        out.extend_from_slice(&self.state.rng.get_stream().to_le_bytes());
        out.extend_from_slice(&self.state.rng.get_word_pos().to_le_bytes());
        match &self.state.loss_ema {
            None => out.push(0),
            Some(l) => {
                out.push(1);
                for (_, v) in l.terms() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let adam = &self.state.adam;
        out.extend_from_slice(&adam.step.to_le_bytes());
        out.extend_from_slice(&(adam.m.len() as u32).to_le_bytes());
        for (i, (m, v)) in adam.m.iter().zip(&adam.v).enumerate() {
            put_tensor(&mut out, &NamedTensor::new(format!("adam.m.{i}"), vec![m.len()], m.clone()));
            put_tensor(&mut out, &NamedTensor::new(format!("adam.v.{i}"), vec![v.len()], v.clone()));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut c = Cursor::new(bytes, path);
        let groups = read_lfck(&mut c)?;
        if c.take(4)? != TRAILER_MAGIC {
            return Err(c.corrupt("missing training-state trailer"));
        }
        let version = c.u16()?;
        if version != TRAILER_VERSION {
            return Err(c.corrupt(format!("unsupported training-state version {version}")));
        }
        let len = c.u32()? as usize;
        let config = TrainConfig::parse(&c.string(len)?)?;
        let len = c.u16()? as usize;
        let manifest_id = c.string(len)?;
        let angular = (c.u32()? as usize, c.u32()? as usize);
        let mut trainer = Trainer::new(config, angular, manifest_id)?;
        trainer.models.load_groups(&groups).map_err(|e| c.corrupt(e.to_string()))?;
        trainer.state.step = c.u64()?;
        let seed: [u8; 32] = c.take(32)?.try_into().unwrap();
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(c.u64()?);
        rng.set_word_pos(c.u128()?);
        trainer.state.rng = rng;
        trainer.state.loss_ema = match c.u8()? {
            0 => None,
            1 => Some(LossBreakdown {
                lambertian_l1: c.f64()?,
                predicted_l1: c.f64()?,
                consistency: c.f64()?,
                tv: c.f64()?,
                total: c.f64()?,
            }),
            f => return Err(c.corrupt(format!("bad loss flag {f}"))),
        };
        let adam_step = c.u64()?;
        let count = c.u32()? as usize;
        let sizes = trainer.models.trainable_sizes();
        if count != sizes.len() {
            return Err(c.corrupt(format!("{count} optimizer slots for {} parameter tensors", sizes.len())));
        }
        let mut m = Vec::with_capacity(count);
        let mut v = Vec::with_capacity(count);
        for (i, &n) in sizes.iter().enumerate() {
            for (which, dst) in [("m", &mut m), ("v", &mut v)] {
                let t = c.tensor()?;
                if t.name != format!("adam.{which}.{i}") || t.shape != [n] {
                    return Err(c.corrupt(format!("unexpected optimizer tensor {} {:?}", t.name, t.shape)));
                }
                dst.push(t.data);
            }
        }
        trainer.state.adam = AdamState { step: adam_step, m, v };
        if !c.is_empty() {
            return Err(c.corrupt("trailing bytes after training state"));
        }
        Ok(trainer)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes, path)
    }
}

/// Identifier of an in-memory training set: SHA-256 over extents and samples.
pub fn dataset_id(dataset: &[LightField]) -> String {
    let mut h = Sha256::new();
    for lf in dataset {
        let e = lf.extents();
        for d in [e.v, e.u, e.y, e.x, CHANNELS] {
            h.update((d as u64).to_le_bytes());
        }
        for s in lf.samples() {
            h.update(s.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trips() {
        let mut c = TrainConfig::desk();
        c.lr = 3.5e-4;
        c.lambda_c = 0.0;
        c.method = Method::Flow;
        c.seed = u64::MAX;
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn config_parse_rejects_bad_input() {
        assert!(TrainConfig::parse("lr 0.1").is_err());
        assert!(TrainConfig::parse("nope = 1").is_err());
        assert!(TrainConfig::parse("lr = 1\nlr = 2").is_err());
        assert!(TrainConfig::parse("crop = 64\ndownsample_to = 30").is_err());
        assert!(TrainConfig::parse("lambda_tv = -0.1").is_err());
        assert!(TrainConfig::parse("architecture = giant").is_err());
        let c = TrainConfig::parse("# desk\ncrop = 64 # comment\ndownsample_to = 32\n\nprecision = double").unwrap();
        assert_eq!((c.crop, c.downsample_to, c.precision), (64, 32, Precision::Double));
        assert_eq!(c.lambda_c, 0.005);
    }

    #[test]
    fn double_precision_training_is_rejected() {
        let c = TrainConfig {
            precision: Precision::Double,
            ..TrainConfig::desk()
        };
        assert!(Trainer::new(c, (2, 2), "x").is_err());
    }

    #[test]
    fn downsampled_mask_needs_all_four() {
        let e = Extents::new(1, 1, 2, 4).unwrap();
        let mask = vec![true, true, true, false, true, true, true, true];
        assert_eq!(downsample_mask(e, &mask), vec![true, false]);
    }
}
