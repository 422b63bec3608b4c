//! Constructive expansions for zero-dimensional and tensor field theories.
//!
//! * [`combinatorics`]: forests, jungles, Kruskal leading trees and the forest formula.
//! * [`borel`]: Nevanlinna disks, Borel and Laplace transforms, remainder fits.
//! * [`vector_lve`]: loop vertex expansion of the quartic O(N) vector model.
//! * [`mlve_toy`]: multiscale loop vertex expansion of a sliced toy model.
//! * [`tensor_quartic`]: quartic tensor invariants, power counting and iterated Cauchy-Schwarz bounds.
//! * [`cli`]: experiment runner behind the `constructive` binary.

pub mod borel;
pub mod cli;
pub mod combinatorics;
pub mod error;
pub mod mlve_toy;
pub mod quadrature;
pub mod tensor_quartic;
pub mod vector_lve;

pub use error::{CostGuard, Error, Result};
