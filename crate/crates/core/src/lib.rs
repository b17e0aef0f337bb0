//! Tensor-train numerics for compressing neural network weights.
//!
//! The crate covers dense tensors and truncated SVD ([`tensor`]), TT tensors
//! and operators ([`tt`]), rank reduction by rounding ([`retraction`]),
//! Riemannian gradient descent toward prescribed small ranks with
//! convergence diagnostics ([`rgd`]), and TT neural layers with training and
//! the dense → TT → low-rank TT conversion pipeline ([`nn`]).

pub mod error;
pub mod nn;
pub mod retraction;
pub mod rgd;
pub mod tensor;
pub mod tt;

pub use error::{Error, Result};
