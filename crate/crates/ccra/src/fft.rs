//! Unitary DFT of a fixed size backed by rustfft.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// `W` with `(W)_{ij} = n^{-1/2} exp(-i 2 pi i j / n)` and its inverse.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n), scale: 1.0 / (n as f64).sqrt() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// In-place `x <- W x`.
    pub fn forward(&self, x: &mut [Complex64]) {
        self.fwd.process(x);
        x.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// In-place `x <- W^* x`.
    pub fn inverse(&self, x: &mut [Complex64]) {
        self.inv.process(x);
        x.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// Unnormalized `sum_t x_t exp(-i 2 pi f t / n)`.
    pub fn forward_raw(&self, x: &mut [Complex64]) {
        self.fwd.process(x);
    }

    /// Unnormalized `sum_f x_f exp(+i 2 pi f t / n)`.
    pub fn inverse_raw(&self, x: &mut [Complex64]) {
        self.inv.process(x);
    }

    pub fn forward_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut v = x.to_vec();
        self.forward(&mut v);
        v
    }

    pub fn inverse_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut v = x.to_vec();
        self.inverse(&mut v);
        v
    }
}
