use crate::error::{arg_err, shape_err, Result, TensorError};
use crate::graph::{BackwardContext, Graph, Operation, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Exponential moving average factor applied to the running statistics.
pub const BATCH_NORM_MOMENTUM: f64 = 0.9;
pub const BATCH_NORM_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormMode {
    Train,
    Infer,
}

/// Per-channel running mean and (biased) variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub initialized: bool,
}

impl<T: Scalar> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
            initialized: false,
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Folds one batch into the running estimate. The first batch seeds it.
    fn update(&mut self, mean: &[T], var: &[T]) {
        if !self.initialized {
            self.mean.copy_from_slice(mean);
            self.var.copy_from_slice(var);
            self.initialized = true;
            return;
        }
        let m = T::from_f64_lossy(BATCH_NORM_MOMENTUM);
        let one_m = T::one() - m;
        for (r, &b) in self.mean.iter_mut().zip(mean) {
            *r = m * *r + one_m * b;
        }
        for (r, &b) in self.var.iter_mut().zip(var) {
            *r = m * *r + one_m * b;
        }
    }

    pub fn cast<U: Scalar>(&self) -> RunningStats<U> {
        RunningStats {
            mean: self.mean.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
            var: self.var.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
            initialized: self.initialized,
        }
    }
}

struct BatchNormOp<T> {
    mode: NormMode,
    mean: Vec<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> Operation<T> for BatchNormOp<T> {
    fn name(&self) -> &'static str {
        "batch_norm"
    }

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>> {
        let x = ctx.inputs[0].data();
        let gamma = ctx.inputs[1].data();
        let g = ctx.grad_output;
        let channels = gamma.len();
        let per = x.len() / channels;
        let count = T::from_usize(per).unwrap();

        let mut grad_x = ctx.needs_grad[0].then(|| vec![T::zero(); x.len()]);
        let mut grad_gamma = vec![T::zero(); channels];
        let mut grad_beta = vec![T::zero(); channels];
        for c in 0..channels {
            let xs = &x[c * per..(c + 1) * per];
            let gs = &g[c * per..(c + 1) * per];
            let (mean, inv_std) = (self.mean[c], self.inv_std[c]);
            let mut sum_g = T::zero();
            let mut sum_gx = T::zero();
            for (&xv, &gv) in xs.iter().zip(gs) {
                sum_g = sum_g + gv;
                sum_gx = sum_gx + gv * (xv - mean) * inv_std;
            }
            grad_gamma[c] = sum_gx;
            grad_beta[c] = sum_g;
            if let Some(gx) = grad_x.as_mut() {
                let out = &mut gx[c * per..(c + 1) * per];
                let k = gamma[c] * inv_std;
                match self.mode {
                    NormMode::Infer => {
                        for (o, &gv) in out.iter_mut().zip(gs) {
                            *o = gv * k;
                        }
                    }
                    NormMode::Train => {
                        let mg = sum_g / count;
                        let mgx = sum_gx / count;
                        for ((o, &gv), &xv) in out.iter_mut().zip(gs).zip(xs) {
                            let xhat = (xv - mean) * inv_std;
                            *o = k * (gv - mg - xhat * mgx);
                        }
                    }
                }
            }
        }
        vec![
            grad_x,
            ctx.needs_grad[1].then_some(grad_gamma),
            ctx.needs_grad[2].then_some(grad_beta),
        ]
    }
}

impl<T: Scalar> Graph<T> {
    /// Batch normalization over every axis except axis 0 (channels).
    ///
    /// Train mode normalizes by the batch statistics and folds them into
    /// `stats`; infer mode reads `stats` and fails if it was never filled.
    pub fn batch_norm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        stats: &mut RunningStats<T>,
        mode: NormMode,
        epsilon: T,
    ) -> Result<Var> {
        if !(epsilon > T::zero()) {
            return Err(arg_err("batch_norm", "epsilon must be > 0"));
        }
        let shape = self.shape(input).to_vec();
        let channels = *shape
            .first()
            .ok_or_else(|| shape_err("batch_norm", "scalar input"))?;
        for (name, v) in [("gamma", gamma), ("beta", beta)] {
            if self.shape(v) != [channels] {
                return Err(shape_err(
                    "batch_norm",
                    format!("{name} {:?} should be [{channels}]", self.shape(v)),
                ));
            }
        }
        if stats.channels() != channels {
            return Err(shape_err(
                "batch_norm",
                format!("running stats for {} channels, input has {channels}", stats.channels()),
            ));
        }
        let x = self.value(input).data();
        let per = x.len() / channels.max(1);
        let (mean, var) = match mode {
            NormMode::Train => {
                let count = T::from_usize(per).unwrap();
                let mut mean = Vec::with_capacity(channels);
                let mut var = Vec::with_capacity(channels);
                for xs in x.chunks_exact(per) {
                    let m = xs.iter().copied().sum::<T>() / count;
                    let v = xs.iter().map(|&a| (a - m) * (a - m)).sum::<T>() / count;
                    mean.push(m);
                    var.push(v);
                }
                (mean, var)
            }
            NormMode::Infer => {
                if !stats.initialized {
                    return Err(TensorError::UninitializedStats);
                }
                (stats.mean.clone(), stats.var.clone())
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + epsilon).sqrt()).collect();
        let (gm, bt) = (self.value(gamma).data(), self.value(beta).data());
        let mut data = Vec::with_capacity(x.len());
        for (c, xs) in x.chunks_exact(per).enumerate() {
            let k = gm[c] * inv_std[c];
            data.extend(xs.iter().map(|&a| (a - mean[c]) * k + bt[c]));
        }
        if mode == NormMode::Train {
            stats.update(&mean, &var);
        }
        let value = Tensor::new(shape, data)?;
        Ok(self.record(
            Box::new(BatchNormOp { mode, mean, inv_std }),
            &[input, gamma, beta],
            value,
        ))
    }
}
