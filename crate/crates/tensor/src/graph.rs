//! Tape of recorded operations and the reverse sweep over it.
//!
//! A [`Graph`] owns every value produced during a forward pass. Nodes are
//! appended in execution order, so the node list is already a topological
//! order and [`Graph::backward`] only needs a single reverse sweep. Handles
//! to nodes are plain indices ([`Var`]).

use crate::error::{Result, TensorError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Everything an operation sees during the reverse sweep.
pub struct BackwardContext<'a, T> {
    pub inputs: Vec<&'a Tensor<T>>,
    pub output: &'a Tensor<T>,
    pub grad_output: &'a [T],
    /// Whether each input participates in differentiation.
    pub needs_grad: Vec<bool>,
}

/// A recorded differentiable operation.
///
/// `backward` returns one entry per input: the gradient of the loss with
/// respect to that input, or `None` when `needs_grad` is false for it.
pub trait Operation<T: Scalar> {
    fn name(&self) -> &'static str;

    fn backward(&self, ctx: &BackwardContext<'_, T>) -> Vec<Option<Vec<T>>>;
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    requires_grad: bool,
    inputs: Vec<Var>,
    op: Option<Box<dyn Operation<T>>>,
}

pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an input tensor. Parameters use `requires_grad = true`.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Vec::new(), None)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// Records the result of a custom operation.
    ///
    /// `value` must already hold the forward result for `inputs`.
    pub fn record(
        &mut self,
        op: Box<dyn Operation<T>>,
        inputs: &[Var],
        value: Tensor<T>,
    ) -> Var {
        debug_assert!(
            value.first_non_finite().is_none()
                || inputs
                    .iter()
                    .any(|v| self.value(*v).first_non_finite().is_some()),
            "{} produced a non-finite value from finite inputs",
            op.name()
        );
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { Some(op) } else { None };
        self.push(value, requires_grad, inputs.to_vec(), op)
    }

    fn push(
        &mut self,
        value: Tensor<T>,
        requires_grad: bool,
        inputs: Vec<Var>,
        op: Option<Box<dyn Operation<T>>>,
    ) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            inputs,
            op,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Scalar value of a one-element node.
    pub fn item(&self, v: Var) -> T {
        self.nodes[v.0].value.data()[0]
    }

    /// Gradient accumulated into a leaf by the last [`Graph::backward`].
    ///
    /// `None` when the leaf does not require grad or the loss does not depend on it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads[v.0].as_deref()
    }

    /// Gradient of a leaf, zero-filled when the loss does not reach it.
    pub fn grad_or_zeros(&self, v: Var) -> Vec<T> {
        self.grad(v)
            .map(<[T]>::to_vec)
            .unwrap_or_else(|| vec![T::zero(); self.value(v).len()])
    }

    /// Reverse sweep from a scalar loss.
    ///
    /// Leaf gradients from previous calls are discarded. Gradients reaching a
    /// node through several consumers are summed.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(shape.to_vec()));
        }
        let mut pending: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        for g in &mut self.grads {
            *g = None;
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        pending[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(grad) = pending[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            let Some(op) = node.op.as_ref() else {
                self.grads[i] = Some(grad);
                continue;
            };
            let ctx = BackwardContext {
                inputs: node.inputs.iter().map(|v| &self.nodes[v.0].value).collect(),
                output: &node.value,
                grad_output: &grad,
                needs_grad: node
                    .inputs
                    .iter()
                    .map(|v| self.nodes[v.0].requires_grad)
                    .collect(),
            };
            let input_grads = op.backward(&ctx);
            debug_assert_eq!(input_grads.len(), node.inputs.len(), "{}", op.name());
            for (input, g) in node.inputs.iter().zip(input_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut pending[input.0] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a = *a + *b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }
}
