//! Semimartingale reflecting Brownian motion (SRBM) in the nonnegative orthant.
//!
//! The crate covers the deterministic and stochastic sides of an SRBM with
//! data `(theta, sigma, R)`:
//!
//! - [`model`]: model data, the six-dimensional example family and its Foster norm
//! - [`matclass`]: S, completely-S, P and M matrix tests and the `R^{-1} theta < 0` condition
//! - [`lcp`]: all solutions of `v = theta + R u`, `u, v >= 0`, `u . v = 0`, and the
//!   one-step Skorokhod projection
//! - [`fluid`]: affine fluid paths, the fluid integrator and attraction verdicts
//! - [`sde`]: Euler-Skorokhod simulation, pathwise validation and first-passage sampling
//! - [`experiments`]: Monte Carlo recurrence experiments
//! - [`pursuit`]: the Brownian pursuit engine (predators chasing a prey)
//! - [`cli`]: the `orthant-lab` command line front end

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fluid;
pub mod lcp;
pub mod linalg;
pub mod matclass;
pub mod model;
pub mod output;
pub mod pursuit;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ExampleDeltas, PathGrid, SrbmModel, StateVec};
