use crate::error::{arg_err, shape_err, Result};
use crate::graph::{BackwardContext, Graph, Operation, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
}

struct BinaryOp(Binary);

impl<T: Scalar> Operation<T> for BinaryOp {
    fn name(&self) -> &'static str {
        match self.0 {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        }
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let g = ctx.grad_output;
        let (a, b) = (ctx.inputs[0].data(), ctx.inputs[1].data());
        let ga = ctx.needs_grad[0].then(|| match self.0 {
            Binary::Add | Binary::Sub => g.to_vec(),
            Binary::Mul => g.iter().zip(b).map(|(&g, &b)| g * b).collect(),
        });
        let gb = ctx.needs_grad[1].then(|| match self.0 {
            Binary::Add => g.to_vec(),
            Binary::Sub => g.iter().map(|&g| -g).collect(),
            Binary::Mul => g.iter().zip(a).map(|(&g, &a)| g * a).collect(),
        });
        vec![ga, gb]
    }
}

#[derive(Clone, Copy)]
enum Unary<T> {
    Scale(T),
    Elu,
    Tanh,
    ScaledTanh(T),
}

struct UnaryOp<T>(Unary<T>);

impl<T: Scalar> Operation<T> for UnaryOp<T> {
    fn name(&self) -> &'static str {
        match self.0 {
            Unary::Scale(_) => "scale",
            Unary::Elu => "elu",
            Unary::Tanh => "tanh",
            Unary::ScaledTanh(_) => "scaled_tanh",
        }
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let g = ctx.grad_output;
        let x = ctx.inputs[0].data();
        let y = ctx.output.data();
        let one = T::one();
        let out = match self.0 {
            Unary::Scale(c) => g.iter().map(|&g| g * c).collect(),
            // d/dx elu = 1 on x >= 0 (including the origin) and e^x = y + 1 below.
            Unary::Elu => g
                .iter()
                .zip(x.iter().zip(y))
                .map(|(&g, (&x, &y))| if x >= T::zero() { g } else { g * (y + one) })
                .collect(),
            Unary::Tanh => g
                .iter()
                .zip(y)
                .map(|(&g, &y)| g * (one - y * y))
                .collect(),
            Unary::ScaledTanh(s) => g
                .iter()
                .zip(y)
                .map(|(&g, &y)| {
                    let t = y / s;
                    g * s * (one - t * t)
                })
                .collect(),
        };
        vec![Some(out)]
    }
}

struct ReduceOp {
    mean: bool,
}

impl<T: Scalar> Operation<T> for ReduceOp {
    fn name(&self) -> &'static str {
        if self.mean {
            "mean"
        } else {
            "sum"
        }
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let n = ctx.inputs[0].len();
        let mut g = ctx.grad_output[0];
        if self.mean {
            g = g / T::from_usize(n).unwrap();
        }
        vec![Some(vec![g; n])]
    }
}

impl<T: Scalar> Graph<T> {
    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let op_name = <BinaryOp as Operation<T>>::name(&BinaryOp(kind));
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                op_name,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let data = match kind {
            Binary::Add => x.iter().zip(y).map(|(&x, &y)| x + y).collect(),
            Binary::Sub => x.iter().zip(y).map(|(&x, &y)| x - y).collect(),
            Binary::Mul => x.iter().zip(y).map(|(&x, &y)| x * y).collect(),
        };
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.record(Box::new(BinaryOp(kind)), &[a, b], value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    fn unary(&mut self, kind: Unary<T>, a: Var) -> Var {
        let x = self.value(a);
        let data = match kind {
            Unary::Scale(c) => x.data().iter().map(|&v| v * c).collect(),
            Unary::Elu => x
                .data()
                .iter()
                .map(|&v| if v >= T::zero() { v } else { v.exp_m1() })
                .collect(),
            Unary::Tanh => x.data().iter().map(|&v| v.tanh()).collect(),
            Unary::ScaledTanh(s) => x.data().iter().map(|&v| s * v.tanh()).collect(),
        };
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.record(Box::new(UnaryOp(kind)), &[a], value)
    }

    /// Multiplication by a constant.
    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(Unary::Scale(c), a)
    }

    /// Exponential linear unit with alpha = 1.
    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(Unary::Elu, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    /// `scale * tanh(x)`, bounded to the open interval (-scale, scale).
    pub fn scaled_tanh(&mut self, a: Var, scale: T) -> Result<Var> {
        if !(scale > T::zero()) {
            return Err(arg_err("scaled_tanh", format!("scale must be > 0, got {scale}")));
        }
        Ok(self.unary(Unary::ScaledTanh(scale), a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        self.record(Box::new(ReduceOp { mean: false }), &[a], Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s: T = x.data().iter().copied().sum();
        let m = s / T::from_usize(x.len().max(1)).unwrap();
        self.record(Box::new(ReduceOp { mean: true }), &[a], Tensor::scalar(m))
    }
}
