//! Differentiable Lambertian rendering, ray-depth regularizers and the
//! composite training loss.
//!
//! Graph-level functions work on batched channel-major tensors:
//! views `[3, N, H, W]`, depths `[N, V, U, H, W]`, light fields
//! `[3, N, V, U, H, W]`. The value-level wrappers at the bottom take the
//! container types from [`crate::lightfield`].

use lfsynth_tensor::{BackwardContext, Graph, Operation, Scalar, Tensor, Var};

use crate::error::{LfError, Result};
use crate::lightfield::{Extents, LightField, RayDepthField, View, CHANNELS};

/// Angular step of a shear: exactly one of `kv`, `ku` is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShearOffset {
    pub kv: usize,
    pub ku: usize,
}

impl ShearOffset {
    pub const V: ShearOffset = ShearOffset { kv: 1, ku: 0 };
    pub const U: ShearOffset = ShearOffset { kv: 0, ku: 1 };

    pub fn new(kv: usize, ku: usize) -> Result<Self> {
        match (kv, ku) {
            (1, 0) | (0, 1) => Ok(Self { kv, ku }),
            _ => Err(LfError::Invalid(format!(
                "shear offset ({kv}, {ku}) must have exactly one unit component"
            ))),
        }
    }
}

fn depth_dims<T: Scalar>(g: &Graph<T>, depths: Var) -> Result<[usize; 5]> {
    let s = g.shape(depths);
    s.try_into()
        .map_err(|_| LfError::ExtentMismatch(format!("depths {s:?} must be [N, V, U, H, W]")))
}

fn angular_offsets(len: usize) -> Vec<i32> {
    (0..len).map(|i| i as i32 - (len / 2) as i32).collect()
}

/// `(y + v·D, x + u·D)` for every ray.
struct RayCoordsOp {
    dims: [usize; 5],
}

impl<T: Scalar> Operation<T> for RayCoordsOp {
    fn name(&self) -> &'static str {
        "ray_coords"
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let [n, v, u, h, w] = self.dims;
        let (ov, ou) = (angular_offsets(v), angular_offsets(u));
        let total = n * v * u * h * w;
        let g = ctx.grad_output;
        let mut grad = Vec::with_capacity(total);
        for _ in 0..n {
            for &a in &ov {
                for &b in &ou {
                    let (fa, fb) = (T::from_i32(a).unwrap(), T::from_i32(b).unwrap());
                    for _ in 0..h * w {
                        let i = grad.len();
                        grad.push(g[i] * fa + g[total + i] * fb);
                    }
                }
            }
        }
        vec![Some(grad)]
    }
}

/// Sampling coordinates `[2, N, V, U, H, W]` of every ray in the reference view.
pub fn ray_coords<T: Scalar>(g: &mut Graph<T>, depths: Var) -> Result<Var> {
    let dims = depth_dims(g, depths)?;
    let [n, v, u, h, w] = dims;
    let (ov, ou) = (angular_offsets(v), angular_offsets(u));
    let d = g.value(depths).data();
    let total = d.len();
    let mut out = vec![T::zero(); 2 * total];
    let mut i = 0;
    for _ in 0..n {
        for &a in &ov {
            for &b in &ou {
                let (fa, fb) = (T::from_i32(a).unwrap(), T::from_i32(b).unwrap());
                for y in 0..h {
                    let fy = T::from_usize(y).unwrap();
                    for x in 0..w {
                        let fx = T::from_usize(x).unwrap();
                        out[i] = fy + fa * d[i];
                        out[total + i] = fx + fb * d[i];
                        i += 1;
                    }
                }
            }
        }
    }
    let mut shape = vec![2];
    shape.extend_from_slice(&dims);
    let value = Tensor::new(shape, out)?;
    Ok(g.record(Box::new(RayCoordsOp { dims }), &[depths], value))
}

/// Warps views `[3, N, H, W]` by ray depths `[N, V, U, H, W]` into a
/// Lambertian light field `[3, N, V, U, H, W]`.
pub fn render_lambertian_graph<T: Scalar>(g: &mut Graph<T>, views: Var, depths: Var) -> Result<Var> {
    let [n, _, _, h, w] = depth_dims(g, depths)?;
    let vs = g.shape(views);
    if vs != [CHANNELS, n, h, w] {
        return Err(LfError::ExtentMismatch(format!(
            "views {vs:?} do not match depths [{n}, _, _, {h}, {w}]"
        )));
    }
    let coords = ray_coords(g, depths)?;
    Ok(g.grid_sample_bilinear(views, coords)?)
}

#[inline]
fn clamp_index(v: f64, n: usize) -> usize {
    if v <= 0.0 {
        0
    } else if v >= (n - 1) as f64 {
        n - 1
    } else {
        v as usize
    }
}

/// Clamped bilinear footprint: indices of `(y0,x0), (y0,x1), (y1,x0), (y1,x1)`
/// within one plane and the fractional weights `(wy, wx)`.
#[inline]
fn footprint<T: Scalar>(y: T, x: T, h: usize, w: usize) -> ([usize; 4], T, T) {
    let (fy, fx) = (y.floor(), x.floor());
    let (y0, y1) = (clamp_index(fy.to_f64_lossy(), h), clamp_index(fy.to_f64_lossy() + 1.0, h));
    let (x0, x1) = (clamp_index(fx.to_f64_lossy(), w), clamp_index(fx.to_f64_lossy() + 1.0, w));
    ([y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1], y - fy, x - fx)
}

struct ShearOp {
    dims: [usize; 5],
    k: ShearOffset,
}

impl ShearOp {
    /// Source view of ray `(iv, iu)`, if it stays on the grid.
    fn source(&self, iv: usize, iu: usize) -> Option<(usize, usize)> {
        Some((iv.checked_sub(self.k.kv)?, iu.checked_sub(self.k.ku)?))
    }

    /// Calls `f(ray, source_plane_offset, y, x)` for every valid ray.
    fn for_each_valid(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let [n, v, u, h, w] = self.dims;
        let plane = h * w;
        for b in 0..n {
            for iv in 0..v {
                for iu in 0..u {
                    let Some((sv, su)) = self.source(iv, iu) else { continue };
                    let base = ((b * v + iv) * u + iu) * plane;
                    let src = ((b * v + sv) * u + su) * plane;
                    for y in 0..h {
                        for x in 0..w {
                            f(base + y * w + x, src, y, x);
                        }
                    }
                }
            }
        }
    }

    fn position<T: Scalar>(&self, d: T, y: usize, x: usize) -> (T, T) {
        let (kv, ku) = (T::from_usize(self.k.kv).unwrap(), T::from_usize(self.k.ku).unwrap());
        (T::from_usize(y).unwrap() + kv * d, T::from_usize(x).unwrap() + ku * d)
    }
}

impl<T: Scalar> Operation<T> for ShearOp {
    fn name(&self) -> &'static str {
        "shear_resample"
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let [_, _, _, h, w] = self.dims;
        let d = ctx.inputs[0].data();
        let g = ctx.grad_output;
        let one = T::one();
        let (kv, ku) = (T::from_usize(self.k.kv).unwrap(), T::from_usize(self.k.ku).unwrap());
        let mut grad = vec![T::zero(); d.len()];
        self.for_each_valid(|ray, src, y, x| {
            let go = g[ray];
            if go == T::zero() {
                return;
            }
            let (py, px) = self.position(d[ray], y, x);
            let ([i00, i01, i10, i11], wy, wx) = footprint(py, px, h, w);
            let s = &d[src..src + h * w];
            let dsy = (one - wx) * (s[i10] - s[i00]) + wx * (s[i11] - s[i01]);
            let dsx = (one - wy) * (s[i01] - s[i00]) + wy * (s[i11] - s[i10]);
            grad[ray] = grad[ray] + go * (kv * dsy + ku * dsx);
            let gs = &mut grad[src..src + h * w];
            gs[i00] = gs[i00] + go * (one - wy) * (one - wx);
            gs[i01] = gs[i01] + go * (one - wy) * wx;
            gs[i10] = gs[i10] + go * wy * (one - wx);
            gs[i11] = gs[i11] + go * wy * wx;
        });
        vec![Some(grad)]
    }
}

/// `D(x + k·D(x, u), u - k)` for every ray, with the validity mask of rays
/// whose view `u - k` exists. Invalid rays hold 0.
pub fn shear_resample_graph<T: Scalar>(g: &mut Graph<T>, depths: Var, k: ShearOffset) -> Result<(Var, Vec<bool>)> {
    let dims = depth_dims(g, depths)?;
    let [_, _, _, h, w] = dims;
    let op = ShearOp { dims, k };
    let d = g.value(depths).data();
    let mut out = vec![T::zero(); d.len()];
    let mut valid = vec![false; d.len()];
    let one = T::one();
    op.for_each_valid(|ray, src, y, x| {
        let (py, px) = op.position(d[ray], y, x);
        let ([i00, i01, i10, i11], wy, wx) = footprint(py, px, h, w);
        let s = &d[src..src + h * w];
        let top = (one - wx) * s[i00] + wx * s[i01];
        let bottom = (one - wx) * s[i10] + wx * s[i11];
        out[ray] = (one - wy) * top + wy * bottom;
        valid[ray] = true;
    });
    let value = Tensor::new(dims.to_vec(), out)?;
    Ok((g.record(Box::new(op), &[depths], value), valid))
}

/// Ray-depth consistency: mean absolute difference between each ray's depth
/// and its sheared neighbor, pooled over all valid (ray, shear) pairs of
/// both axis-aligned shears.
pub fn depth_consistency_graph<T: Scalar>(g: &mut Graph<T>, depths: Var) -> Result<Var> {
    let mut terms = Vec::with_capacity(2);
    for k in [ShearOffset::V, ShearOffset::U] {
        let (sheared, valid) = shear_resample_graph(g, depths, k)?;
        let count = valid.iter().filter(|&&b| b).count();
        let term = g.masked_l1_loss(depths, sheared, valid)?;
        terms.push((term, count));
    }
    let total: usize = terms.iter().map(|t| t.1).sum();
    if total == 0 {
        return Ok(g.constant(Tensor::scalar(T::zero())));
    }
    let weight = |c: usize| T::from_f64_lossy(c as f64 / total as f64);
    let a = g.scale(terms[0].0, weight(terms[0].1));
    let b = g.scale(terms[1].0, weight(terms[1].1));
    Ok(g.add(a, b)?)
}

/// Spatial total variation: `mean|∂x D| + mean|∂y D|` with forward
/// differences inside each view.
pub fn tv_graph<T: Scalar>(g: &mut Graph<T>, depths: Var) -> Result<Var> {
    let [_, _, _, h, w] = depth_dims(g, depths)?;
    let mut acc = g.constant(Tensor::scalar(T::zero()));
    for (axis, len) in [(4, w), (3, h)] {
        if len < 2 {
            continue;
        }
        let hi = g.narrow(depths, axis, 1, len - 1)?;
        let lo = g.narrow(depths, axis, 0, len - 1)?;
        let term = g.l1_loss(hi, lo)?;
        acc = g.add(acc, term)?;
    }
    Ok(acc)
}

/// Graph handles of the composite loss terms.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub lambertian: Var,
    pub predicted: Var,
    pub consistency: Var,
    pub tv: Var,
    pub total: Var,
}

/// Loss values of one evaluation of the composite objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub lambertian_l1: f64,
    pub predicted_l1: f64,
    pub consistency: f64,
    pub tv: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn terms(&self) -> [(&'static str, f64); 5] {
        [
            ("lambertian_l1", self.lambertian_l1),
            ("predicted_l1", self.predicted_l1),
            ("consistency", self.consistency),
            ("tv", self.tv),
            ("total", self.total),
        ]
    }

    /// First non-finite term, if any.
    pub fn non_finite(&self) -> Option<(&'static str, f64)> {
        self.terms().into_iter().find(|(_, v)| !v.is_finite())
    }
}

impl LossVars {
    pub fn values<T: Scalar>(&self, g: &Graph<T>) -> LossBreakdown {
        LossBreakdown {
            lambertian_l1: g.item(self.lambertian).to_f64_lossy(),
            predicted_l1: g.item(self.predicted).to_f64_lossy(),
            consistency: g.item(self.consistency).to_f64_lossy(),
            tv: g.item(self.tv).to_f64_lossy(),
            total: g.item(self.total).to_f64_lossy(),
        }
    }
}

/// `|Lr - L| + |L̂ - L| + λc·ψc(D) + λtv·ψtv(D)`, summed in that order.
pub fn total_loss_graph<T: Scalar>(
    g: &mut Graph<T>,
    lambertian: Var,
    predicted: Var,
    target: Var,
    depths: Var,
    lambda_c: f64,
    lambda_tv: f64,
) -> Result<LossVars> {
    if !(lambda_c >= 0.0 && lambda_tv >= 0.0) {
        return Err(LfError::Invalid(format!(
            "loss weights must be >= 0, got lambda_c={lambda_c} lambda_tv={lambda_tv}"
        )));
    }
    let lamb = g.l1_loss(lambertian, target)?;
    let pred = g.l1_loss(predicted, target)?;
    let consistency = depth_consistency_graph(g, depths)?;
    let tv = tv_graph(g, depths)?;
    let sum = g.add(lamb, pred)?;
    let wc = g.scale(consistency, T::from_f64_lossy(lambda_c));
    let sum = g.add(sum, wc)?;
    let wtv = g.scale(tv, T::from_f64_lossy(lambda_tv));
    let total = g.add(sum, wtv)?;
    Ok(LossVars {
        lambertian: lamb,
        predicted: pred,
        consistency,
        tv,
        total,
    })
}

fn cast<T: Scalar>(v: f32) -> T {
    T::from_f64_lossy(v as f64)
}

/// Views as a `[3, N, H, W]` tensor.
pub fn pack_views<T: Scalar>(views: &[&View]) -> Result<Tensor<T>> {
    let first = views.first().ok_or_else(|| LfError::Invalid("empty batch".into()))?;
    let (h, w) = (first.height(), first.width());
    let n = views.len();
    let mut data = vec![T::zero(); CHANNELS * n * h * w];
    for (b, view) in views.iter().enumerate() {
        if (view.height(), view.width()) != (h, w) {
            return Err(LfError::ExtentMismatch("views in a batch differ in size".into()));
        }
        for (p, px) in view.pixels().chunks_exact(CHANNELS).enumerate() {
            for (c, &s) in px.iter().enumerate() {
                data[(c * n + b) * h * w + p] = cast(s);
            }
        }
    }
    Ok(Tensor::new([CHANNELS, n, h, w], data)?)
}

/// Light fields as a `[3, N, V, U, H, W]` tensor.
pub fn pack_light_fields<T: Scalar>(lfs: &[&LightField]) -> Result<Tensor<T>> {
    let first = lfs.first().ok_or_else(|| LfError::Invalid("empty batch".into()))?;
    let e = first.extents();
    let (n, rays) = (lfs.len(), e.rays());
    let mut data = vec![T::zero(); CHANNELS * n * rays];
    for (b, lf) in lfs.iter().enumerate() {
        if lf.extents() != e {
            return Err(LfError::ExtentMismatch("light fields in a batch differ in extent".into()));
        }
        for (r, px) in lf.samples().chunks_exact(CHANNELS).enumerate() {
            for (c, &s) in px.iter().enumerate() {
                data[(c * n + b) * rays + r] = cast(s);
            }
        }
    }
    Ok(Tensor::new([CHANNELS, n, e.v, e.u, e.y, e.x], data)?)
}

/// Inverse of [`pack_light_fields`].
pub fn unpack_light_fields<T: Scalar>(t: &Tensor<T>) -> Result<Vec<LightField>> {
    let s = t.shape();
    if s.len() != 6 || s[0] != CHANNELS {
        return Err(LfError::ExtentMismatch(format!("tensor {s:?} is not [3, N, V, U, H, W]")));
    }
    let (n, e) = (s[1], Extents::new(s[2], s[3], s[4], s[5])?);
    let rays = e.rays();
    let d = t.data();
    (0..n)
        .map(|b| {
            let mut samples = Vec::with_capacity(rays * CHANNELS);
            for r in 0..rays {
                for c in 0..CHANNELS {
                    samples.push(d[(c * n + b) * rays + r].to_f64_lossy() as f32);
                }
            }
            LightField::new(e, samples)
        })
        .collect()
}

/// Depth fields as a `[N, V, U, H, W]` tensor.
pub fn pack_depths<T: Scalar>(fields: &[&RayDepthField]) -> Result<Tensor<T>> {
    let first = fields.first().ok_or_else(|| LfError::Invalid("empty batch".into()))?;
    let e = first.extents();
    let mut data = Vec::with_capacity(fields.len() * e.rays());
    for f in fields {
        if f.extents() != e {
            return Err(LfError::ExtentMismatch("depth fields in a batch differ in extent".into()));
        }
        data.extend(f.depths().iter().map(|&d| cast::<T>(d)));
    }
    Ok(Tensor::new([fields.len(), e.v, e.u, e.y, e.x], data)?)
}

/// Inverse of [`pack_depths`].
pub fn unpack_depths<T: Scalar>(t: &Tensor<T>) -> Result<Vec<RayDepthField>> {
    let s = t.shape();
    if s.len() != 5 {
        return Err(LfError::ExtentMismatch(format!("tensor {s:?} is not [N, V, U, H, W]")));
    }
    let e = Extents::new(s[1], s[2], s[3], s[4])?;
    t.data()
        .chunks_exact(e.rays())
        .map(|c| RayDepthField::new(e, c.iter().map(|v| v.to_f64_lossy() as f32).collect()))
        .collect()
}

/// Warps `view` by `depths` (single precision, matching training).
pub fn render_lambertian(view: &View, depths: &RayDepthField) -> Result<LightField> {
    let e = depths.extents();
    if (view.height(), view.width()) != (e.y, e.x) {
        return Err(LfError::ExtentMismatch(format!(
            "view {}x{} vs depths {e}",
            view.height(),
            view.width()
        )));
    }
    let mut g = Graph::<f32>::new();
    let v = g.constant(pack_views(&[view])?);
    let d = g.constant(pack_depths(&[depths])?);
    let out = render_lambertian_graph(&mut g, v, d)?;
    Ok(unpack_light_fields(g.value(out))?.remove(0))
}

/// Sheared depths and their validity mask.
pub fn shear_resample(depths: &RayDepthField, k: ShearOffset) -> Result<(RayDepthField, Vec<bool>)> {
    let mut g = Graph::<f64>::new();
    let d = g.constant(pack_depths(&[depths])?);
    let (s, valid) = shear_resample_graph(&mut g, d, k)?;
    Ok((unpack_depths(g.value(s))?.remove(0), valid))
}

/// ψc of one depth field, evaluated in double precision.
pub fn depth_consistency_loss(depths: &RayDepthField) -> Result<f64> {
    let mut g = Graph::<f64>::new();
    let d = g.constant(pack_depths(&[depths])?);
    let c = depth_consistency_graph(&mut g, d)?;
    Ok(g.item(c))
}

/// ψtv of one depth field, evaluated in double precision.
pub fn tv_loss(depths: &RayDepthField) -> Result<f64> {
    let mut g = Graph::<f64>::new();
    let d = g.constant(pack_depths(&[depths])?);
    let t = tv_graph(&mut g, d)?;
    Ok(g.item(t))
}

/// Composite loss of one example, evaluated in double precision.
pub fn total_loss(
    lambertian: &LightField,
    predicted: &LightField,
    target: &LightField,
    depths: &RayDepthField,
    lambda_c: f64,
    lambda_tv: f64,
) -> Result<LossBreakdown> {
    let e = target.extents();
    if lambertian.extents() != e || predicted.extents() != e || depths.extents() != e {
        return Err(LfError::ExtentMismatch(format!(
            "loss inputs {} / {} / {} / {}",
            lambertian.extents(),
            predicted.extents(),
            e,
            depths.extents()
        )));
    }
    let mut g = Graph::<f64>::new();
    let lr = g.constant(pack_light_fields(&[lambertian])?);
    let lh = g.constant(pack_light_fields(&[predicted])?);
    let l = g.constant(pack_light_fields(&[target])?);
    let d = g.constant(pack_depths(&[depths])?);
    let vars = total_loss_graph(&mut g, lr, lh, l, d, lambda_c, lambda_tv)?;
    Ok(vars.values(&g))
}
