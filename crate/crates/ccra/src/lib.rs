//! Simulation front end for compressive coded random access: FFT-backed
//! operators, waveform synthesis, full-physical-layer frames, Monte Carlo
//! calibration and the experiment harness behind the `ccra` binary.

pub mod capture;
pub mod config;
pub mod experiments;
pub mod fft;
pub mod frame;
pub mod output;
pub mod recovery;
pub mod signal;
