use crate::error::{arg_err, shape_err, Result};
use crate::graph::{BackwardContext, Graph, Operation, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Bilinear footprint of one sample with indices clamped to the image.
struct Footprint<T> {
    i00: usize,
    i01: usize,
    i10: usize,
    i11: usize,
    wy: T,
    wx: T,
}

#[inline]
fn footprint<T: Scalar>(y: T, x: T, h: usize, w: usize) -> Footprint<T> {
    let fy = y.floor();
    let fx = x.floor();
    let wy = y - fy;
    let wx = x - fx;
    let clamp = |v: T, n: usize| -> usize {
        let v = v.to_f64_lossy();
        if v <= 0.0 {
            0
        } else if v >= (n - 1) as f64 {
            n - 1
        } else {
            v as usize
        }
    };
    let one = T::one();
    let y0 = clamp(fy, h);
    let y1 = clamp(fy + one, h);
    let x0 = clamp(fx, w);
    let x1 = clamp(fx + one, w);
    Footprint {
        i00: y0 * w + x0,
        i01: y0 * w + x1,
        i10: y1 * w + x0,
        i11: y1 * w + x1,
        wy,
        wx,
    }
}

#[derive(Debug, Clone, Copy)]
struct SampleGeometry {
    channels: usize,
    images: usize,
    height: usize,
    width: usize,
    /// Sample points per image.
    points: usize,
}

struct GridSampleOp {
    geometry: SampleGeometry,
}

impl<T: Scalar> Operation<T> for GridSampleOp {
    fn name(&self) -> &'static str {
        "grid_sample_bilinear"
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let g = self.geometry;
        let image = ctx.inputs[0].data();
        let coords = ctx.inputs[1].data();
        let grad = ctx.grad_output;
        let plane = g.height * g.width;
        let total = g.images * g.points;
        let one = T::one();

        let mut grad_image = ctx.needs_grad[0].then(|| vec![T::zero(); image.len()]);
        let mut grad_coords = ctx.needs_grad[1].then(|| vec![T::zero(); coords.len()]);
        for n in 0..g.images {
            for p in 0..g.points {
                let s = n * g.points + p;
                let (y, x) = (coords[s], coords[total + s]);
                let f = footprint(y, x, g.height, g.width);
                let (mut gy, mut gx) = (T::zero(), T::zero());
                for c in 0..g.channels {
                    let go = grad[(c * g.images + n) * g.points + p];
                    let base = (c * g.images + n) * plane;
                    if let Some(gi) = grad_image.as_mut() {
                        gi[base + f.i00] = gi[base + f.i00] + go * (one - f.wy) * (one - f.wx);
                        gi[base + f.i01] = gi[base + f.i01] + go * (one - f.wy) * f.wx;
                        gi[base + f.i10] = gi[base + f.i10] + go * f.wy * (one - f.wx);
                        gi[base + f.i11] = gi[base + f.i11] + go * f.wy * f.wx;
                    }
                    if grad_coords.is_some() {
                        let (v00, v01) = (image[base + f.i00], image[base + f.i01]);
                        let (v10, v11) = (image[base + f.i10], image[base + f.i11]);
                        gy = gy + go * ((one - f.wx) * (v10 - v00) + f.wx * (v11 - v01));
                        gx = gx + go * ((one - f.wy) * (v01 - v00) + f.wy * (v11 - v10));
                    }
                }
                if let Some(gc) = grad_coords.as_mut() {
                    gc[s] = gy;
                    gc[total + s] = gx;
                }
            }
        }
        vec![grad_image, grad_coords]
    }
}

impl<T: Scalar> Graph<T> {
    /// Bilinear sampling at continuous `(y, x)` pixel positions.
    ///
    /// Two layouts are accepted:
    /// * `image [C, H, W]`, `coords [2, points...]` → `[C, points...]`
    /// * `image [C, N, H, W]`, `coords [2, N, points...]` → `[C, N, points...]`
    ///
    /// `coords[0]` holds rows, `coords[1]` columns. Neighbor indices are
    /// clamped to the border, so samples outside the image repeat the edge.
    /// Differentiable with respect to both the image and the coordinates.
    pub fn grid_sample_bilinear(&mut self, image: Var, coords: Var) -> Result<Var> {
        let is = self.shape(image).to_vec();
        let cs = self.shape(coords).to_vec();
        let (channels, images, height, width) = match is.len() {
            3 => (is[0], 1, is[1], is[2]),
            4 => (is[0], is[1], is[2], is[3]),
            _ => {
                return Err(shape_err(
                    "grid_sample_bilinear",
                    format!("image {is:?} must be [C, H, W] or [C, N, H, W]"),
                ))
            }
        };
        let batched = is.len() == 4;
        if cs.len() < 2 || cs[0] != 2 || (batched && (cs.len() < 3 || cs[1] != images)) {
            return Err(shape_err(
                "grid_sample_bilinear",
                format!("coords {cs:?} do not match image {is:?}"),
            ));
        }
        if height == 0 || width == 0 {
            return Err(shape_err("grid_sample_bilinear", "empty image"));
        }
        let c = self.value(coords).data();
        if let Some(i) = c.iter().position(|v| !v.is_finite()) {
            return Err(arg_err(
                "grid_sample_bilinear",
                format!("non-finite coordinate {} at element {i}", c[i]),
            ));
        }
        let points = c.len() / 2 / images;
        let geometry = SampleGeometry {
            channels,
            images,
            height,
            width,
            points,
        };
        let img = self.value(image).data();
        let plane = height * width;
        let total = images * points;
        let one = T::one();
        let mut out = vec![T::zero(); channels * total];
        for n in 0..images {
            for p in 0..points {
                let s = n * points + p;
                let f = footprint(c[s], c[total + s], height, width);
                for ch in 0..channels {
                    let base = (ch * images + n) * plane;
                    let top = (one - f.wx) * img[base + f.i00] + f.wx * img[base + f.i01];
                    let bottom = (one - f.wx) * img[base + f.i10] + f.wx * img[base + f.i11];
                    out[(ch * images + n) * points + p] = (one - f.wy) * top + f.wy * bottom;
                }
            }
        }
        let mut out_shape = vec![channels];
        out_shape.extend_from_slice(&cs[1..]);
        let value = Tensor::new(out_shape, out)?;
        Ok(self.record(Box::new(GridSampleOp { geometry }), &[image, coords], value))
    }
}
