//! Tensor-train representations of tensors ([`TTVector`]) and of linear
//! operators ([`TTMatrix`]).

mod matrix;
mod rank;
mod vector;

pub use matrix::{TTCore4, TTMatrix};
pub use rank::{ModeFactorization, RankCap, RankProfile};
pub use vector::{TTCore3, TTVector};
