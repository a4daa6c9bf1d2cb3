//! Dense `f64` tensors with reverse-mode automatic differentiation.
//!
//! Values live in [`Tensor`]; differentiable computations are recorded on a
//! [`Graph`] through [`Var`] handles and differentiated with
//! [`Graph::backward`].
//!
//! ```
//! use stpotr_tensor::{Graph, Tensor};
//!
//! let g = Graph::new();
//! let x = g.param(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
//! let y = x.mul(&x).unwrap().sum();
//! g.backward(y).unwrap();
//! assert_eq!(x.grad().unwrap().data(), &[2.0, 4.0, 6.0]);
//! ```

mod error;
pub mod exec;
pub mod gradcheck;
mod graph;
mod linalg;
pub mod shape;
mod tensor;

pub use error::{Result, TensorError};
pub use exec::Execution;
pub use graph::{concat, Graph, Var};
pub use tensor::Tensor;
