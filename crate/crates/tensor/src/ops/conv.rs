//! "Same"-padded 2D (dilated) and 3D convolutions via im2col + GEMM.
//!
//! Feature maps are channel-major: `[C, batch..., H, W]` for 2D and
//! `[C, batch..., S, H, W]` for 3D, so one GEMM per column block maps
//! `[C_out, K] x [K, cols]` straight into the output.

use crate::error::{arg_err, shape_err, Result};
use crate::graph::{BackwardContext, Graph, Operation, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Columns per im2col block; keeps the scratch buffer cache sized.
const BLOCK_COLS: usize = 4096;

#[derive(Debug, Clone, Copy)]
struct ConvGeometry {
    c_in: usize,
    c_out: usize,
    batch: usize,
    depth: usize,
    height: usize,
    width: usize,
    kd: usize,
    kh: usize,
    kw: usize,
    dilation: usize,
}

impl ConvGeometry {
    fn taps(&self) -> usize {
        self.c_in * self.kd * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.depth * self.height * self.width
    }

    fn rows(&self) -> usize {
        self.depth * self.height
    }

    fn rows_per_block(&self) -> usize {
        (BLOCK_COLS / self.width).max(1)
    }

    /// Visits every (tap, source-offset) pair of the kernel.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, isize, isize, isize)) {
        let dil = self.dilation as isize;
        for ci in 0..self.c_in {
            for a in 0..self.kd {
                for b in 0..self.kh {
                    for c in 0..self.kw {
                        let k = ((ci * self.kd + a) * self.kh + b) * self.kw + c;
                        let dz = a as isize - (self.kd / 2) as isize;
                        let dy = (b as isize - (self.kh / 2) as isize) * dil;
                        let dx = (c as isize - (self.kw / 2) as isize) * dil;
                        f(k, ci, dz, dy, dx);
                    }
                }
            }
        }
    }

    /// Source row index and valid output x-range for one tap and output row.
    #[inline]
    fn source_row(&self, row: usize, dz: isize, dy: isize, dx: isize) -> Option<(usize, usize, usize)> {
        let z = (row / self.height) as isize + dz;
        let y = (row % self.height) as isize + dy;
        if z < 0 || z >= self.depth as isize || y < 0 || y >= self.height as isize {
            return None;
        }
        let w = self.width as isize;
        let x0 = (-dx).clamp(0, w) as usize;
        let x1 = (w - dx).clamp(0, w) as usize;
        if x0 >= x1 {
            return None;
        }
        Some((z as usize * self.height + y as usize, x0, x1))
    }

    fn im2col<T: Scalar>(&self, input: &[T], b: usize, r0: usize, r1: usize, col: &mut [T]) {
        let w = self.width;
        let cols = (r1 - r0) * w;
        col[..self.taps() * cols].fill(T::zero());
        self.for_each_tap(|k, ci, dz, dy, dx| {
            let plane = (ci * self.batch + b) * self.positions();
            let dst = &mut col[k * cols..(k + 1) * cols];
            for row in r0..r1 {
                if let Some((src_row, x0, x1)) = self.source_row(row, dz, dy, dx) {
                    let src = plane + src_row * w;
                    let d = (row - r0) * w;
                    let s0 = (src as isize + x0 as isize + dx) as usize;
                    dst[d + x0..d + x1].copy_from_slice(&input[s0..s0 + (x1 - x0)]);
                }
            }
        });
    }

    fn col2im_add<T: Scalar>(&self, col: &[T], b: usize, r0: usize, r1: usize, out: &mut [T]) {
        let w = self.width;
        let cols = (r1 - r0) * w;
        self.for_each_tap(|k, ci, dz, dy, dx| {
            let plane = (ci * self.batch + b) * self.positions();
            let src = &col[k * cols..(k + 1) * cols];
            for row in r0..r1 {
                if let Some((src_row, x0, x1)) = self.source_row(row, dz, dy, dx) {
                    let base = plane + src_row * w;
                    let d = (row - r0) * w;
                    let o0 = (base as isize + x0 as isize + dx) as usize;
                    for (o, &v) in out[o0..o0 + (x1 - x0)].iter_mut().zip(&src[d + x0..d + x1]) {
                        *o = *o + v;
                    }
                }
            }
        });
    }

    fn blocks(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let rows = self.rows();
        let step = self.rows_per_block();
        (0..self.batch).flat_map(move |b| {
            (0..rows)
                .step_by(step)
                .map(move |r0| (b, r0, (r0 + step).min(rows)))
        })
    }

    fn forward<T: Scalar>(&self, input: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
        let per_channel = self.batch * self.positions();
        let mut out = Vec::with_capacity(self.c_out * per_channel);
        for &b in bias {
            out.extend(std::iter::repeat_n(b, per_channel));
        }
        let k = self.taps();
        let mut col = vec![T::zero(); k * self.rows_per_block().min(self.rows()) * self.width];
        for (b, r0, r1) in self.blocks() {
            let cols = (r1 - r0) * self.width;
            self.im2col(input, b, r0, r1, &mut col);
            let offset = b * self.positions() + r0 * self.width;
            T::gemm(
                self.c_out,
                k,
                cols,
                T::one(),
                weight,
                k,
                1,
                &col,
                cols,
                1,
                T::one(),
                &mut out[offset..],
                per_channel,
                1,
            );
        }
        out
    }
}

struct ConvOp {
    geometry: ConvGeometry,
}

impl<T: Scalar> Operation<T> for ConvOp {
    fn name(&self) -> &'static str {
        if self.geometry.kd == 1 {
            "conv2d"
        } else {
            "conv3d"
        }
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let g = &self.geometry;
        let (input, weight) = (ctx.inputs[0].data(), ctx.inputs[1].data());
        let grad = ctx.grad_output;
        let per_channel = g.batch * g.positions();
        let k = g.taps();

        let grad_bias = ctx.needs_grad[2].then(|| {
            grad.chunks_exact(per_channel)
                .map(|c| c.iter().copied().sum())
                .collect::<Vec<T>>()
        });

        let mut grad_input = ctx.needs_grad[0].then(|| vec![T::zero(); input.len()]);
        let mut grad_weight = ctx.needs_grad[1].then(|| vec![T::zero(); weight.len()]);
        if grad_input.is_some() || grad_weight.is_some() {
            let block = k * g.rows_per_block().min(g.rows()) * g.width;
            let mut col = vec![T::zero(); block];
            let mut dcol = vec![T::zero(); if grad_input.is_some() { block } else { 0 }];
            for (b, r0, r1) in g.blocks() {
                let cols = (r1 - r0) * g.width;
                let offset = b * g.positions() + r0 * g.width;
                let gblock = &grad[offset..];
                if let Some(gw) = grad_weight.as_mut() {
                    g.im2col(input, b, r0, r1, &mut col);
                    // dW[O,K] += G[O,cols] * col^T
                    T::gemm(
                        g.c_out, cols, k, T::one(), gblock, per_channel, 1, &col, 1, cols,
                        T::one(), gw, k, 1,
                    );
                }
                if let Some(gi) = grad_input.as_mut() {
                    // dcol[K,cols] = W^T * G
                    T::gemm(
                        k, g.c_out, cols, T::one(), weight, 1, k, gblock, per_channel, 1,
                        T::zero(), &mut dcol, cols, 1,
                    );
                    g.col2im_add(&dcol, b, r0, r1, gi);
                }
            }
        }
        vec![grad_input, grad_weight, grad_bias]
    }
}

impl<T: Scalar> Graph<T> {
    /// 2D convolution with "same" zero padding over the two trailing axes.
    ///
    /// `input` is `[C_in, batch..., H, W]`, `weight` is `[C_out, C_in, k, k]`
    /// with k in {1, 3} and `bias` is `[C_out]`. Axes between the channel and
    /// spatial axes are independent images.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, dilation: usize) -> Result<Var> {
        let ws = self.shape(weight).to_vec();
        if ws.len() != 4 || ws[2] != ws[3] || !(ws[2] == 1 || ws[2] == 3) {
            return Err(shape_err("conv2d", format!("weight {ws:?} is not [O, C, k, k] with k in {{1, 3}}")));
        }
        if dilation < 1 {
            return Err(arg_err("conv2d", "dilation must be >= 1"));
        }
        let is = self.shape(input).to_vec();
        if is.len() < 3 {
            return Err(shape_err("conv2d", format!("input {is:?} needs [C, .., H, W]")));
        }
        let r = is.len();
        let geometry = ConvGeometry {
            c_in: ws[1],
            c_out: ws[0],
            batch: is[1..r - 2].iter().product(),
            depth: 1,
            height: is[r - 2],
            width: is[r - 1],
            kd: 1,
            kh: ws[2],
            kw: ws[3],
            dilation,
        };
        self.conv_impl("conv2d", input, weight, bias, geometry)
    }

    /// 3D convolution, 3×3×3 kernel, "same" zero padding over the three
    /// trailing axes of `[C_in, batch..., S, H, W]`.
    pub fn conv3d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let ws = self.shape(weight).to_vec();
        if ws.len() != 5 || ws[2..] != [3, 3, 3] {
            return Err(shape_err("conv3d", format!("weight {ws:?} is not [O, C, 3, 3, 3]")));
        }
        let is = self.shape(input).to_vec();
        if is.len() < 4 {
            return Err(shape_err("conv3d", format!("input {is:?} needs [C, .., S, H, W]")));
        }
        let r = is.len();
        let geometry = ConvGeometry {
            c_in: ws[1],
            c_out: ws[0],
            batch: is[1..r - 3].iter().product(),
            depth: is[r - 3],
            height: is[r - 2],
            width: is[r - 1],
            kd: 3,
            kh: 3,
            kw: 3,
            dilation: 1,
        };
        self.conv_impl("conv3d", input, weight, bias, geometry)
    }

    fn conv_impl(
        &mut self,
        op: &'static str,
        input: Var,
        weight: Var,
        bias: Var,
        geometry: ConvGeometry,
    ) -> Result<Var> {
        let is = self.shape(input).to_vec();
        if is[0] != geometry.c_in {
            return Err(shape_err(
                op,
                format!("input has {} channels, weight expects {}", is[0], geometry.c_in),
            ));
        }
        if self.shape(bias) != [geometry.c_out] {
            return Err(shape_err(
                op,
                format!("bias {:?} should be [{}]", self.shape(bias), geometry.c_out),
            ));
        }
        let data = geometry.forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
        );
        let mut out_shape = is;
        out_shape[0] = geometry.c_out;
        let value = Tensor::new(out_shape, data)?;
        Ok(self.record(Box::new(ConvOp { geometry }), &[input, weight, bias], value))
    }
}
