//! Exact and sampled tools for down-up walks on set systems, Glauber
//! dynamics of Ising models, and certificates of entropic independence,
//! fractional log-concavity and entropy contraction.
//!
//! Sets are `u64` bitmasks over a ground set of at most 64 elements; spin
//! configurations are masks with bit `i` set iff `σ_i = +1`.

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certify;
pub mod combinatorics;
pub mod divergence;
pub mod error;
pub mod ising;
pub mod kernel;
pub mod linalg;
pub mod rng;
pub mod scaling;
pub mod spectrum;
pub mod subset;
pub mod walk;

pub use error::{Error, Result};
pub use ising::IsingModel;
pub use kernel::{Level, StateSpace, TransitionKernel};
pub use rng::SeedSplitter;
pub use subset::{AlphaVector, MarginalVector, SpinDensity, SubsetDensity};
pub use walk::Trajectory;
