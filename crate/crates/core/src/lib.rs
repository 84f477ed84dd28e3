//! Compressive coded random access (CCRA) algorithms.
//!
//! This crate is `no_std` (with `alloc`) and carries everything that does not
//! need an FFT library or the filesystem: system configuration and seeding,
//! sparse channel and preamble generation, the compressed-sensing solvers
//! (generic over [`solver::SensingOperator`]), per-slot physical-layer
//! processing, the coded-slotted-ALOHA interference-cancellation loop, and the
//! analytical companions (density evolution, rate bounds).
//!
//! The `ccra` crate supplies the FFT-backed measurement operator, waveform
//! synthesis and the command line front end.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod channel;
pub mod mac;
pub mod math;
pub mod model;
pub mod phy;
pub mod preamble;
pub mod seed;
pub mod solver;
pub mod stats;

pub use num_complex::Complex64;

pub use model::{CheckedConfig, ConfigError, Modulation, SystemConfig};
pub use seed::StreamSeed;
