use crate::error::{arg_err, shape_err, Result};
use crate::graph::{BackwardContext, Graph, Operation, Var};
use crate::scalar::Scalar;
use crate::tensor::{strides, Tensor};

struct ReshapeOp;

impl<T: Scalar> Operation<T> for ReshapeOp {
    fn name(&self) -> &'static str {
        "reshape"
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        vec![Some(ctx.grad_output.to_vec())]
    }
}

/// Gather map of a permutation: `out[i] = in[map[i]]`.
fn permutation_map(shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let n: usize = shape.iter().product();
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; out_shape.len()];
    for _ in 0..n {
        map.push(
            idx.iter()
                .zip(axes)
                .map(|(&i, &a)| i * in_strides[a])
                .sum(),
        );
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    (out_shape, map)
}

struct PermuteOp {
    map: Vec<usize>,
}

impl<T: Scalar> Operation<T> for PermuteOp {
    fn name(&self) -> &'static str {
        "permute"
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let mut g = vec![T::zero(); ctx.inputs[0].len()];
        for (&src, &go) in self.map.iter().zip(ctx.grad_output) {
            g[src] = go;
        }
        vec![Some(g)]
    }
}

/// Block layout shared by concat and narrow: `outer` repetitions of
/// contiguous chunks of `axis_len * inner` elements.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, inner)
}

struct ConcatOp {
    axis: usize,
}

impl<T: Scalar> Operation<T> for ConcatOp {
    fn name(&self) -> &'static str {
        "concat"
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let (outer, inner) = split_at_axis(ctx.output.shape(), self.axis);
        let out_chunk = ctx.output.shape()[self.axis] * inner;
        let mut offset = 0;
        let mut grads = Vec::with_capacity(ctx.inputs.len());
        for (input, &needs) in ctx.inputs.iter().zip(&ctx.needs_grad) {
            let chunk = input.shape()[self.axis] * inner;
            if needs {
                let mut g = Vec::with_capacity(input.len());
                for o in 0..outer {
                    let start = o * out_chunk + offset;
                    g.extend_from_slice(&ctx.grad_output[start..start + chunk]);
                }
                grads.push(Some(g));
            } else {
                grads.push(None);
            }
            offset += chunk;
        }
        grads
    }
}

struct NarrowOp {
    axis: usize,
    start: usize,
}

impl<T: Scalar> Operation<T> for NarrowOp {
    fn name(&self) -> &'static str {
        "narrow"
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let shape = ctx.inputs[0].shape();
        let (outer, inner) = split_at_axis(shape, self.axis);
        let len = ctx.output.shape()[self.axis];
        let in_chunk = shape[self.axis] * inner;
        let out_chunk = len * inner;
        let mut g = vec![T::zero(); ctx.inputs[0].len()];
        for o in 0..outer {
            let dst = o * in_chunk + self.start * inner;
            g[dst..dst + out_chunk]
                .copy_from_slice(&ctx.grad_output[o * out_chunk..(o + 1) * out_chunk]);
        }
        vec![Some(g)]
    }
}

impl<T: Scalar> Graph<T> {
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(a).len() {
            return Err(shape_err(
                "reshape",
                format!("cannot view {:?} as {:?}", self.shape(a), shape),
            ));
        }
        let value = Tensor::new(shape.to_vec(), self.value(a).data().to_vec())?;
        Ok(self.record(Box::new(ReshapeOp), &[a], value))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let mut seen = vec![false; shape.len()];
        if axes.len() != shape.len()
            || axes
                .iter()
                .any(|&ax| ax >= shape.len() || std::mem::replace(&mut seen[ax], true))
        {
            return Err(arg_err(
                "permute",
                format!("{axes:?} is not a permutation of {} axes", shape.len()),
            ));
        }
        let (out_shape, map) = permutation_map(&shape, axes);
        let src = self.value(a).data();
        let data = map.iter().map(|&i| src[i]).collect();
        let value = Tensor::new(out_shape, data)?;
        Ok(self.record(Box::new(PermuteOp { map }), &[a], value))
    }

    /// Joins tensors that agree on every axis except `axis`.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| arg_err("concat", "no inputs"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(arg_err("concat", format!("axis {axis} out of range")));
        }
        let mut out_shape = base.clone();
        out_shape[axis] = 0;
        for p in parts {
            let s = self.shape(*p);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(shape_err("concat", format!("{s:?} vs {base:?} on axis {axis}")));
            }
            out_shape[axis] += s[axis];
        }
        let (outer, inner) = split_at_axis(&out_shape, axis);
        let mut data = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for p in parts {
                let v = self.value(*p);
                let chunk = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let value = Tensor::new(out_shape, data)?;
        Ok(self.record(Box::new(ConcatOp { axis }), parts, value))
    }

    /// Slice `start..start + len` along `axis`.
    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(arg_err(
                "narrow",
                format!("range {start}..{} on axis {axis} of {shape:?}", start + len),
            ));
        }
        let (outer, inner) = split_at_axis(&shape, axis);
        let in_chunk = shape[axis] * inner;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let s = o * in_chunk + start * inner;
            data.extend_from_slice(&src[s..s + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let value = Tensor::new(out_shape, data)?;
        Ok(self.record(Box::new(NarrowOp { axis, start }), &[a], value))
    }
}
