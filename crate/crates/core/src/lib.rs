//! Concentration parameters for broadcast models indexed by finite rooted trees.
//!
//! The central quantity is the descendant generating function
//! `δ(v) = Σ_r |D_r(v)| b^r` and its ℓ² norm `Δ`, which controls the
//! exponential-moment and transportation-entropy bounds for tree-indexed
//! Markov measures with `b`-Lipschitz kernels. The crate computes these
//! quantities on explicit trees and on level-generated families, and ships
//! exact small-instance checkers for the resulting inequalities.
//!
//! Modules:
//!
//! - [`tree`]: immutable rooted trees, generators, distances, truncation.
//! - [`delta`]: `δ`, `Δ`, pair-distance sums and the `Δ_k` series.
//! - [`spectral`]: the child-sum operator `Q`, its norms, the mixing matrix.
//! - [`broadcast`]: finite-state broadcast models, exact measures, Ising DP.
//! - [`transport`]: exact Wasserstein-1 over Hamming metrics, relative entropy.
//! - [`verify`]: inequality checkers producing structured reports.

pub mod broadcast;
pub mod delta;
mod error;
mod flow;
pub mod format;
pub mod spectral;
pub mod transport;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use tree::{GeneratorSpec, RootedTree, VertexId};
