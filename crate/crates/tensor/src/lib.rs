//! Reverse-mode automatic differentiation over dense row-major arrays.
//!
//! The engine covers exactly what the light-field pipeline needs: dilated
//! 2D and 3D convolutions, batch normalization, a few activations,
//! differentiable bilinear sampling and L1 losses. Graphs are rebuilt on
//! every forward pass; [`Graph::backward`] sweeps them once in reverse.
//!
//! ```
//! use lfsynth_tensor::{Graph, Tensor};
//!
//! let mut g = Graph::<f64>::new();
//! let x = g.param(Tensor::new([3], vec![1.0, -2.0, 0.5]).unwrap());
//! let sq = g.mul(x, x).unwrap();
//! let loss = g.sum(sq);
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(x).unwrap(), &[2.0, -4.0, 1.0]);
//! ```

mod error;
pub mod gradcheck;
mod graph;
mod ops;
pub mod optim;
mod scalar;
mod tensor;

pub use error::{Result, TensorError};
pub use graph::{BackwardContext, Graph, Operation, Var};
pub use ops::{NormMode, RunningStats, BATCH_NORM_EPSILON, BATCH_NORM_MOMENTUM};
pub use optim::{Adam, AdamState};
pub use scalar::{Precision, Scalar};
pub use tensor::Tensor;
