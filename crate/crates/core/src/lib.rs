//! Opinion dynamics over homogeneous Erdős–Rényi graphs.
//!
//! Agents hold opinions in `[0, 1]` and repeatedly average their neighbours'
//! opinions with their own intrinsic opinion. Over a random graph the stable
//! opinion is itself random; this crate computes it per graph, computes its
//! deterministic mean-field surrogate built from the expected influence
//! matrix, and provides the exact (enumeration) and Monte Carlo machinery to
//! measure the distance between the two.
//!
//! The crate is `no_std` and only needs `alloc`. Parallel execution, file
//! formats and the command line live in the `opinion-mf` companion crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

mod error;
mod linalg;

pub mod dynamics;
pub mod matfun;
pub mod meanfield;
pub mod montecarlo;
pub mod optdemo;
pub mod rand_graph;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
