//! Core algorithms for modular-ridge bitstring analysis.
//!
//! Everything in this crate is pure computation on in-memory values:
//! register decoding and ridge arithmetic, the exact noise-channel joint
//! distribution with deterministic sampling, plug-in mutual information
//! over bit-subset lattices with Möbius inversion and per-order synergy
//! mass, and the resampling machinery (bootstrap, permutation tests,
//! reliability sweeps) built on counter-style RNG streams.
//!
//! The crate is `no_std` (with `alloc`); file formats, the CLI, and report
//! output live in the companion `mobridge` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod diag;
pub mod error;
pub mod keyrec;
pub mod lattice;
pub mod metrics;
pub mod ridge;
pub mod rng;
pub mod sim;
pub mod stats;

pub use data::{Dataset, ExperimentSpec, Shot};
pub use error::CoreError;
pub use rng::Stream;
