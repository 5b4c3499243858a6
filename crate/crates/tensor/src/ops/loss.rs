use crate::error::{shape_err, Result};
use crate::graph::{BackwardContext, Graph, Operation, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean absolute difference, optionally restricted to a mask.
struct L1Op {
    mask: Option<Vec<bool>>,
    count: usize,
}

fn sign<T: Scalar>(d: T) -> T {
    if d > T::zero() {
        T::one()
    } else if d < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

impl<T: Scalar> Operation<T> for L1Op {
    fn name(&self) -> &'static str {
        "l1_loss"
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let (a, b) = (ctx.inputs[0].data(), ctx.inputs[1].data());
        if self.count == 0 {
            return vec![
                ctx.needs_grad[0].then(|| vec![T::zero(); a.len()]),
                ctx.needs_grad[1].then(|| vec![T::zero(); b.len()]),
            ];
        }
        let scale = ctx.grad_output[0] / T::from_usize(self.count).unwrap();
        let ga: Vec<T> = a
            .iter()
            .zip(b)
            .enumerate()
            .map(|(i, (&x, &y))| match &self.mask {
                Some(m) if !m[i] => T::zero(),
                _ => sign(x - y) * scale,
            })
            .collect();
        let gb = ctx.needs_grad[1].then(|| ga.iter().map(|&g| -g).collect());
        vec![ctx.needs_grad[0].then_some(ga), gb]
    }
}

impl<T: Scalar> Graph<T> {
    /// Mean of `|a - b|` over all elements. The subgradient at ties is 0.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        self.l1_impl(a, b, None)
    }

    /// Mean of `|a - b|` over elements where `mask` is true; 0 when none are.
    pub fn masked_l1_loss(&mut self, a: Var, b: Var, mask: Vec<bool>) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return Err(shape_err(
                "masked_l1_loss",
                format!("mask of {} elements for {:?}", mask.len(), self.shape(a)),
            ));
        }
        self.l1_impl(a, b, Some(mask))
    }

    fn l1_impl(&mut self, a: Var, b: Var, mask: Option<Vec<bool>>) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                "l1_loss",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let mut sum = T::zero();
        let mut count = 0usize;
        for (i, (&p, &q)) in x.iter().zip(y).enumerate() {
            if mask.as_ref().is_none_or(|m| m[i]) {
                sum = sum + (p - q).abs();
                count += 1;
            }
        }
        let loss = if count == 0 {
            T::zero()
        } else {
            sum / T::from_usize(count).unwrap()
        };
        Ok(self.record(
            Box::new(L1Op { mask, count }),
            &[a, b],
            Tensor::scalar(loss),
        ))
    }
}
