//! Resource-aware multifidelity Bayesian optimization.
//!
//! This crate holds the numerical core: Gaussian-process surrogates (single
//! fidelity and autoregressive multifidelity), expected-improvement
//! acquisition, candidate gridding, the batch seeding program with its exact
//! branch-and-bound solver, the analytical benchmark problems and the
//! optimization loop itself.
//!
//! Everything here is `no_std` and only needs an allocator. Parallel dispatch,
//! configuration files, CSV traces and plotting live in the `raal` crate,
//! which plugs a threaded [`engine::Dispatcher`] into [`engine::run`].
//!
//! Fidelity levels are 0-based throughout: level `0` is the cheapest model
//! and level `M - 1` is the ground truth.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acquisition;
pub mod benchmarks;
pub mod design;
pub mod engine;
mod error;
pub mod gp;
pub mod gridding;
mod hyperopt;
pub mod kernel;
pub mod linalg;
mod math;
pub mod mfgp;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
