//! Evaluation: per-view reconstruction error, depth error against oracle
//! ground truth, error histograms and the tab-separated report.

use std::fmt::Write as _;

use lfsynth_tensor::{Graph, NormMode, Precision, Scalar, Var};

use crate::dataset::DatasetScene;
use crate::error::{LfError, Result};
use crate::lightfield::{Extents, LightField, RayDepthField, View, CHANNELS};
use crate::networks::{
    depth_net_graph, direct_net_graph, flow_net_graph, occlusion_net_graph, NetRole, MIN_INPUT_SIZE,
};
use crate::render::{pack_views, render_lambertian_graph, unpack_depths, unpack_light_fields};
use crate::scene::{bin_of, Histogram};
use crate::train::{center_example, downsample_depths, downsample_mask, Models, Trainer};

pub const HISTOGRAM_BINS: usize = 50;
pub const HISTOGRAM_MAX: f64 = 0.2;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Mean L1 error of every view, `[v][u]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct PerViewErrors {
    pub v: usize,
    pub u: usize,
    pub errors: Vec<f64>,
}

impl PerViewErrors {
    pub fn get(&self, iv: usize, iu: usize) -> f64 {
        self.errors[iv * self.u + iu]
    }

    pub fn all_views_mean(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }

    /// Views on the outer ring: `max(|v|, |u|)` equal to its largest value
    /// in the grid (4 for an 8×8 grid).
    pub fn outermost_views(&self) -> Vec<(usize, usize)> {
        let e = Extents {
            v: self.v,
            u: self.u,
            y: 1,
            x: 1,
        };
        let radius = |iv, iu| {
            let (ov, ou) = e.offset(iv, iu);
            ov.abs().max(ou.abs())
        };
        let views = (0..self.v).flat_map(|iv| (0..self.u).map(move |iu| (iv, iu)));
        let max = views.clone().map(|(iv, iu)| radius(iv, iu)).max().unwrap_or(0);
        views.filter(|&(iv, iu)| radius(iv, iu) == max).collect()
    }

    pub fn outermost_mean(&self) -> f64 {
        let ring = self.outermost_views();
        ring.iter().map(|&(iv, iu)| self.get(iv, iu)).sum::<f64>() / ring.len() as f64
    }

    /// Element-wise mean of several grids of the same size.
    pub fn average(all: &[PerViewErrors]) -> Result<PerViewErrors> {
        let first = all.first().ok_or_else(|| LfError::Eval("no per-view errors to average".into()))?;
        if all.iter().any(|p| (p.v, p.u) != (first.v, first.u)) {
            return Err(LfError::ExtentMismatch("per-view grids differ in size".into()));
        }
        let errors = (0..first.errors.len())
            .map(|i| all.iter().map(|p| p.errors[i]).sum::<f64>() / all.len() as f64)
            .collect();
        Ok(PerViewErrors {
            v: first.v,
            u: first.u,
            errors,
        })
    }
}

pub fn mean_l1_per_view(pred: &LightField, truth: &LightField) -> Result<PerViewErrors> {
    let e = pred.extents();
    if e != truth.extents() {
        return Err(LfError::ExtentMismatch(format!("prediction {e} vs truth {}", truth.extents())));
    }
    let per = e.pixels() * CHANNELS;
    let errors = pred
        .samples()
        .chunks_exact(per)
        .zip(truth.samples().chunks_exact(per))
        .map(|(a, b)| a.iter().zip(b).map(|(&p, &t)| (p as f64 - t as f64).abs()).sum::<f64>() / per as f64)
        .collect();
    Ok(PerViewErrors { v: e.v, u: e.u, errors })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthError {
    pub mae: f64,
    pub median: f64,
    pub count: usize,
}

/// Absolute disparity error over the rays selected by `mask`. For an even
/// count the median is the mean of the two middle values.
pub fn depth_error(pred: &RayDepthField, gt: &RayDepthField, mask: &[bool]) -> Result<DepthError> {
    if pred.extents() != gt.extents() || mask.len() != gt.depths().len() {
        return Err(LfError::ExtentMismatch(format!(
            "depths {} vs {} with a mask of {} rays",
            pred.extents(),
            gt.extents(),
            mask.len()
        )));
    }
    let errors: Vec<f64> = pred
        .depths()
        .iter()
        .zip(gt.depths())
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((&p, &g), _)| (p as f64 - g as f64).abs())
        .collect();
    depth_error_from(errors)
}

pub(crate) fn depth_error_from(mut errors: Vec<f64>) -> Result<DepthError> {
    if errors.is_empty() {
        return Err(LfError::Eval("depth error mask selects no rays".into()));
    }
    let n = errors.len();
    let mae = errors.iter().sum::<f64>() / n as f64;
    errors.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        errors[n / 2]
    } else {
        0.5 * (errors[n / 2 - 1] + errors[n / 2])
    };
    Ok(DepthError { mae, median, count: n })
}

/// Mean squared 4-neighbour Laplacian over interior pixels, summed over channels.
pub fn laplacian_energy(view: &View) -> f64 {
    let (h, w) = (view.height(), view.width());
    if h < 3 || w < 3 {
        return 0.0;
    }
    let mut total = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            for c in 0..CHANNELS {
                let at = |yy: usize, xx: usize| view.get(yy, xx, c) as f64;
                let l = at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) - 4.0 * at(y, x);
                total += l * l;
            }
        }
    }
    total / ((h - 2) * (w - 2)) as f64
}

/// A held-out example at training resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalExample {
    pub input: View,
    pub target: LightField,
    pub depths: RayDepthField,
    /// Rays whose four source rays are all textured and at one depth.
    pub texture_mask: Vec<bool>,
}

impl EvalExample {
    /// Centered `crop` window halved to `downsample_to`, the same transform
    /// training applies.
    pub fn from_scene(
        lf: &LightField,
        depths: &RayDepthField,
        textured: &[bool],
        crop: usize,
        downsample_to: usize,
    ) -> Result<Self> {
        let e = lf.extents();
        if depths.extents() != e || textured.len() != e.rays() {
            return Err(LfError::ExtentMismatch(format!("scene parts disagree with {e}")));
        }
        let ex = center_example(lf, crop, downsample_to)?;
        let (y0, x0) = ((e.y - crop) / 2, (e.x - crop) / 2);
        let ce = e.with_spatial(crop, crop);
        let cropped = RayDepthField::from_fn(ce, |iv, iu, y, x| depths.get(iv, iu, y0 + y, x0 + x))?;
        let flat_mask: Vec<bool> = (0..ce.v)
            .flat_map(|iv| (0..ce.u).flat_map(move |iu| (0..crop).flat_map(move |y| (0..crop).map(move |x| (iv, iu, y, x)))))
            .map(|(iv, iu, y, x)| {
                let d = cropped.get(iv, iu, y, x);
                let same = |dy: usize, dx: usize| {
                    let (yy, xx) = (y - y % 2 + dy, x - x % 2 + dx);
                    cropped.get(iv, iu, yy, xx) == d
                };
                textured[e.ray_index(iv, iu, y0 + y, x0 + x)] && same(0, 0) && same(0, 1) && same(1, 0) && same(1, 1)
            })
            .collect();
        Ok(Self {
            input: ex.input,
            target: ex.target,
            depths: downsample_depths(&cropped)?,
            texture_mask: downsample_mask(ce, &flat_mask),
        })
    }

    pub fn from_dataset_scene(scene: &DatasetScene, crop: usize, downsample_to: usize) -> Result<Self> {
        Self::from_scene(&scene.light_field, &scene.depths, &scene.textured, crop, downsample_to)
    }
}

/// Output of a trained model on one input view.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub light_field: LightField,
    /// Present for the depth-based pipeline only.
    pub lambertian: Option<LightField>,
    pub depths: Option<RayDepthField>,
}

/// Runs the trained models in inference mode on a single view.
pub fn infer(models: &Models, view: &View) -> Result<Prediction> {
    infer_with(models, view, Precision::Single)
}

/// [`infer`] with every tensor held at `precision`. Outputs are rounded to
/// single precision.
pub fn infer_with(models: &Models, view: &View, precision: Precision) -> Result<Prediction> {
    if view.height() < MIN_INPUT_SIZE || view.width() < MIN_INPUT_SIZE {
        return Err(LfError::Network(format!(
            "input view {}x{} is smaller than {MIN_INPUT_SIZE}x{MIN_INPUT_SIZE}",
            view.height(),
            view.width()
        )));
    }
    match precision {
        Precision::Single => infer_in::<f32>(models, view),
        Precision::Double => infer_in::<f64>(models, view),
    }
}

fn infer_in<T: Scalar>(models: &Models, view: &View) -> Result<Prediction> {
    let mode = NormMode::Infer;
    let mut g = Graph::<T>::new();
    let x = g.constant(pack_views(&[view])?);
    let lf = |g: &Graph<T>, v: Var| -> Result<LightField> { Ok(unpack_light_fields(g.value(v))?.remove(0)) };
    Ok(match models {
        Models::Ours { depth, occlusion } => {
            let (mut dp, mut op) = (depth.cast::<T>(), occlusion.cast::<T>());
            let (bd, bo) = (dp.bind(&mut g, false), op.bind(&mut g, false));
            let d = depth_net_graph(&mut g, &mut dp, &bd, x, mode)?;
            let lr = render_lambertian_graph(&mut g, x, d)?;
            let lhat = occlusion_net_graph(&mut g, &mut op, &bo, lr, d, mode)?;
            Prediction {
                light_field: lf(&g, lhat)?,
                lambertian: Some(lf(&g, lr)?),
                depths: Some(unpack_depths(g.value(d))?.remove(0)),
            }
        }
        Models::Flow(p) | Models::Direct(p) => {
            let mut pt = p.cast::<T>();
            let b = pt.bind(&mut g, false);
            let out = match p.role {
                NetRole::Flow => flow_net_graph(&mut g, &mut pt, &b, x, mode)?,
                _ => direct_net_graph(&mut g, &mut pt, &b, x, mode)?,
            };
            Prediction {
                light_field: lf(&g, out)?,
                lambertian: None,
                depths: None,
            }
        }
    })
}

/// Provenance of one evaluated checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub config_hash: String,
    pub checkpoint_id: String,
    pub dataset_manifest_id: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    /// `predicted`, `lambertian`, `flow` or `direct`.
    pub method: String,
    pub per_view: PerViewErrors,
    /// Per-example all-views mean L1 errors, in example order.
    pub example_means: Vec<f64>,
    pub histogram: Histogram,
}

impl MethodRow {
    fn new(method: &str, per_example: Vec<PerViewErrors>) -> Result<Self> {
        let per_view = PerViewErrors::average(&per_example)?;
        let example_means: Vec<f64> = per_example.iter().map(PerViewErrors::all_views_mean).collect();
        let mut counts = vec![0u64; HISTOGRAM_BINS];
        for &m in &example_means {
            counts[bin_of(m, 0.0, HISTOGRAM_MAX, HISTOGRAM_BINS)] += 1;
        }
        Ok(Self {
            method: method.to_string(),
            per_view,
            example_means,
            histogram: Histogram {
                lo: 0.0,
                hi: HISTOGRAM_MAX,
                counts,
            },
        })
    }

    /// `bin_left,count` rows.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_left,count\n");
        for (i, c) in self.histogram.counts.iter().enumerate() {
            let _ = writeln!(s, "{:.4},{c}", self.histogram.bin_left(i));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset_manifest_id: String,
    pub runs: Vec<(String, RunManifest)>,
    pub rows: Vec<MethodRow>,
    /// Depth error of the depth-based pipeline on textured rays.
    pub depth: Option<DepthError>,
}

impl EvalReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Tab-separated table with provenance comment lines.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# dataset_manifest\t{}", self.dataset_manifest_id);
        for (method, m) in &self.runs {
            let _ = writeln!(
                s,
                "# run\t{method}\tconfig={}\tcheckpoint={}\ttraining_manifest={}\ttool={}",
                m.config_hash, m.checkpoint_id, m.dataset_manifest_id, m.tool_version
            );
        }
        let _ = writeln!(s, "# outermost = ring of views with max(|v|,|u|) at its grid maximum");
        let Some(first) = self.rows.first() else { return s };
        let (v, u) = (first.per_view.v, first.per_view.u);
        let e = Extents { v, u, y: 1, x: 1 };
        s.push_str("method\tall_views_mean\toutermost_mean");
        for iv in 0..v {
            for iu in 0..u {
                let (ov, ou) = e.offset(iv, iu);
                let _ = write!(s, "\tv{ov}u{ou}");
            }
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{}\t{:.6}\t{:.6}", r.method, r.per_view.all_views_mean(), r.per_view.outermost_mean());
            for e in &r.per_view.errors {
                let _ = write!(s, "\t{e:.6}");
            }
            s.push('\n');
        }
        if let Some(d) = &self.depth {
            let _ = writeln!(s, "depth\tmae={:.6}\tmedian={:.6}\trays={}", d.mae, d.median, d.count);
        }
        s
    }
}

/// A loaded checkpoint with its identifier.
#[derive(Debug, Clone)]
pub struct Checkpointed {
    pub trainer: Trainer,
    pub checkpoint_id: String,
}

/// Evaluates every checkpoint on the same examples. Checkpoints trained on
/// different data are rejected.
pub fn evaluate(examples: &[EvalExample], dataset_manifest_id: &str, runs: &mut [Checkpointed]) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(LfError::Eval("no evaluation examples".into()));
    }
    let Some(first) = runs.first() else {
        return Err(LfError::Eval("no checkpoints to evaluate".into()));
    };
    let training = first.trainer.manifest_id.clone();
    if let Some(r) = runs.iter().find(|r| r.trainer.manifest_id != training) {
        return Err(LfError::Eval(format!(
            "checkpoint {} was trained on dataset {}, others on {training}",
            r.checkpoint_id, r.trainer.manifest_id
        )));
    }
    let e = examples[0].target.extents();
    let mut report = EvalReport {
        dataset_manifest_id: dataset_manifest_id.to_string(),
        runs: Vec::new(),
        rows: Vec::new(),
        depth: None,
    };
    for run in runs.iter_mut() {
        if run.trainer.angular != (e.v, e.u) {
            return Err(LfError::ExtentMismatch(format!(
                "checkpoint {} predicts {}x{} views, examples have {}x{}",
                run.checkpoint_id, run.trainer.angular.0, run.trainer.angular.1, e.v, e.u
            )));
        }
        let method = run.trainer.models.method();
        let mut predicted = Vec::with_capacity(examples.len());
        let mut lambertian = Vec::new();
        let mut depth_errors = Vec::new();
        for ex in examples {
            let p = infer(&run.trainer.models, &ex.input)?;
            predicted.push(mean_l1_per_view(&p.light_field, &ex.target)?);
            if let Some(lr) = &p.lambertian {
                lambertian.push(mean_l1_per_view(lr, &ex.target)?);
            }
            if let Some(d) = &p.depths {
                depth_errors.extend(
                    d.depths()
                        .iter()
                        .zip(ex.depths.depths())
                        .zip(&ex.texture_mask)
                        .filter(|(_, &m)| m)
                        .map(|((&a, &b), _)| (a as f64 - b as f64).abs()),
                );
            }
        }
        let label = match method {
            crate::train::Method::Ours => "predicted",
            crate::train::Method::Flow => "flow",
            crate::train::Method::Direct => "direct",
        };
        report.rows.push(MethodRow::new(label, predicted)?);
        if !lambertian.is_empty() {
            report.rows.push(MethodRow::new("lambertian", lambertian)?);
            report.depth = Some(depth_error_from(depth_errors)?);
        }
        report.runs.push((
            method.name().to_string(),
            RunManifest {
                config_hash: run.trainer.config.hash(),
                checkpoint_id: run.checkpoint_id.clone(),
                dataset_manifest_id: training.clone(),
                tool_version: TOOL_VERSION.to_string(),
            },
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_count_median_averages_middle_pair() {
        let d = depth_error_from(vec![4.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!((d.mae, d.median, d.count), (2.5, 2.5, 4));
        assert!(depth_error_from(Vec::new()).is_err());
    }

    #[test]
    fn outer_ring_of_even_grid_is_one_sided() {
        let p = PerViewErrors {
            v: 8,
            u: 8,
            errors: vec![0.0; 64],
        };
        let ring = p.outermost_views();
        assert_eq!(ring.len(), 15);
        assert!(ring.iter().all(|&(iv, iu)| iv == 0 || iu == 0));
    }

    #[test]
    fn laplacian_of_linear_ramp_is_zero() {
        let v = View::from_fn(6, 7, |y, x, c| 0.01 * (y as f32) - 0.02 * x as f32 + c as f32 * 0.1).unwrap();
        assert!(laplacian_energy(&v) < 1e-10);
    }
}
