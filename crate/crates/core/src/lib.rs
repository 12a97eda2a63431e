//! LLC cache-way allocation for virtualized RAN platforms, driven by learned
//! digital twins of per-vBS compute usage.
//!
//! The crate is organized bottom-up:
//!
//! - [`types`]: contexts, platform description, allocations, feature encodings
//! - [`platform`]: synthetic ground-truth compute oracle and the energy model
//! - [`nn`]: the dense network engine used for both learned models
//! - [`twin`]: per-vBS digital twins (regression)
//! - [`allocator`]: allocation space, exhaustive search, baselines and the
//!   classifier policy
//! - [`pipeline`]: dataset generation, training and policy benchmarking
//! - [`cli`]: run configuration, artifact persistence and the command set
//!   behind the `llc-lab` binary
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod allocator;
pub mod cli;
pub mod error;
pub mod nn;
pub mod pipeline;
pub mod platform;
mod seeds;
pub mod twin;
pub mod types;

pub use error::{Error, Result};
pub use seeds::stream_rng;
