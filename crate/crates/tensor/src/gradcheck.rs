//! Central finite-difference gradient checking in double precision.
//!
//! The numerical side only ever calls the forward pass, so it stays an
//! independent oracle for every backward implementation.

use crate::error::{Result, TensorError};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Comparison of analytic and numerical gradients for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputReport {
    pub checked: usize,
    pub max_abs_error: f64,
    /// `|analytic - numeric|_2 / max(|analytic|_2, |numeric|_2)`, 0 when both vanish.
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub inputs: Vec<InputReport>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.inputs
            .iter()
            .map(|r| r.relative_error)
            .fold(0.0, f64::max)
    }
}

pub const DEFAULT_STEP: f64 = 1e-6;

fn relative(a: &[f64], n: &[f64]) -> (f64, f64) {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    let max_abs = diff.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let scale = norm(a).max(norm(n));
    let rel = if scale < 1e-300 { 0.0 } else { norm(&diff) / scale };
    (max_abs, rel)
}

fn evaluate<F, E>(inputs: &[Tensor<f64>], f: &F) -> Result<f64, E>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, E>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    Ok(g.item(loss))
}

/// Checks every element of every input.
pub fn check_gradients<F, E>(inputs: &[Tensor<f64>], f: F, step: f64) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, E>,
    E: From<TensorError>,
{
    let all: Vec<Vec<usize>> = inputs.iter().map(|t| (0..t.len()).collect()).collect();
    check_gradient_elements(inputs, f, step, &all)
}

/// Checks the listed element indices of each input.
///
/// `f` builds a scalar loss from leaves holding `inputs` (all marked
/// `requires_grad`). It must be deterministic; train-mode side effects such as
/// running statistics must not feed back into the loss. Any error type that
/// wraps [`TensorError`] can be used.
pub fn check_gradient_elements<F, E>(
    inputs: &[Tensor<f64>],
    f: F,
    step: f64,
    elements: &[Vec<usize>],
) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, E>,
    E: From<TensorError>,
{
    assert_eq!(elements.len(), inputs.len(), "one index list per input");
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    g.backward(loss)?;

    let mut reports = Vec::with_capacity(inputs.len());
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, idx) in elements.iter().enumerate() {
        let analytic_full = g.grad_or_zeros(vars[i]);
        let mut analytic = Vec::with_capacity(idx.len());
        let mut numeric = Vec::with_capacity(idx.len());
        for &j in idx {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = orig + step;
            let plus = evaluate(&probe, &f)?;
            probe[i].data_mut()[j] = orig - step;
            let minus = evaluate(&probe, &f)?;
            probe[i].data_mut()[j] = orig;
            numeric.push((plus - minus) / (2.0 * step));
            analytic.push(analytic_full[j]);
        }
        let (max_abs_error, relative_error) = relative(&analytic, &numeric);
        reports.push(InputReport {
            checked: idx.len(),
            max_abs_error,
            relative_error,
        });
    }
    Ok(GradCheckReport { inputs: reports })
}
