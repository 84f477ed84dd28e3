//! Control-channel recovery: the measurement operator abstraction and the
//! sparse solvers that run on it.
//!
//! The unknown is the stacked channel vector `h = [h_0; ...; h_{U-1}]`, one
//! block of `s_d` taps per preamble. The operator maps it to the control-band
//! observation, `(A h)_f = sum_u p_hat_{u,f} sum_l h_{u,l} exp(-i 2 pi f l / n)`
//! for `f` in the band.

use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::math::twiddle;
use crate::preamble::PreambleSet;

mod bpdn;
mod cg;
mod greedy;
mod threshold;

pub use bpdn::{bpdn_solve, lasso_objective, lasso_solve, BpdnOptions};
pub use cg::{cgls_on_support, CgOutcome};
pub use greedy::{cosamp_solve, hicosamp_solve, GreedyOptions};
pub use threshold::{detect_activity, flat_threshold, hier_threshold, ActivityEstimate, Sparsity};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("sparsity budget k1*k2 = {k} exceeds the number of measurements m = {m}")]
    Budget { k: usize, m: usize },
    #[error("epsilon must be nonnegative, got {0}")]
    Epsilon(f64),
}

/// Block-structured linear map `C^{U*s_d} -> C^m`.
pub trait SensingOperator {
    fn rows(&self) -> usize;
    fn num_blocks(&self) -> usize;
    fn block_len(&self) -> usize;

    fn cols(&self) -> usize {
        self.num_blocks() * self.block_len()
    }

    /// `out = A x`.
    fn forward(&self, x: &[Complex64], out: &mut [Complex64]);

    /// `out = A^* r`.
    fn adjoint(&self, r: &[Complex64], out: &mut [Complex64]);

    /// `out = A_S v` where `S = support` (column indices) and `v` holds the
    /// values on `S`.
    fn forward_on(&self, support: &[usize], vals: &[Complex64], out: &mut [Complex64]) {
        let mut x = alloc::vec![ZERO; self.cols()];
        for (&j, &v) in support.iter().zip(vals) {
            x[j] = v;
        }
        self.forward(&x, out);
    }

    /// `out = (A^* r)_S`.
    fn adjoint_on(&self, support: &[usize], r: &[Complex64], out: &mut [Complex64]) {
        let mut full = alloc::vec![ZERO; self.cols()];
        self.adjoint(r, &mut full);
        for (o, &j) in out.iter_mut().zip(support) {
            *o = full[j];
        }
    }
}

/// Direct (table-driven) evaluation of the control-band operator.
///
/// Holds the `m x s_d` table of delay phases `exp(-i 2 pi f l / n)` and the
/// preamble values on the band. Full applications cost `O(m * U * s_d)`;
/// restricted applications cost `O(m * |S|)`, which is what the least-squares
/// steps of the greedy solvers use.
#[derive(Debug, Clone)]
pub struct DirectOperator {
    n: usize,
    band: Vec<usize>,
    s_d: usize,
    preambles: Vec<Vec<Complex64>>,
    /// Row-major `m x s_d`.
    phases: Vec<Complex64>,
}

impl DirectOperator {
    pub fn new(preambles: &PreambleSet, s_d: usize) -> Self {
        let n = preambles.n();
        let band = preambles.band().to_vec();
        let mut phases = Vec::with_capacity(band.len() * s_d);
        for &f in &band {
            for l in 0..s_d {
                phases.push(twiddle(f as u64 * l as u64, n));
            }
        }
        let values = (0..preambles.num_users()).map(|u| preambles.band_values(u).to_vec()).collect();
        DirectOperator { n, band, s_d, preambles: values, phases }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn band(&self) -> &[usize] {
        &self.band
    }

    pub fn preamble_values(&self, u: usize) -> &[Complex64] {
        &self.preambles[u]
    }

    #[inline]
    fn entry(&self, row: usize, col: usize) -> Complex64 {
        let (u, l) = (col / self.s_d, col % self.s_d);
        self.preambles[u][row] * self.phases[row * self.s_d + l]
    }
}

impl SensingOperator for DirectOperator {
    fn rows(&self) -> usize {
        self.band.len()
    }

    fn num_blocks(&self) -> usize {
        self.preambles.len()
    }

    fn block_len(&self) -> usize {
        self.s_d
    }

    fn forward(&self, x: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(x.len(), self.cols());
        out.iter_mut().for_each(|o| *o = ZERO);
        for (u, block) in x.chunks_exact(self.s_d).enumerate() {
            if block.iter().all(|v| *v == ZERO) {
                continue;
            }
            let p = &self.preambles[u];
            for (row, o) in out.iter_mut().enumerate() {
                let ph = &self.phases[row * self.s_d..(row + 1) * self.s_d];
                let acc: Complex64 = ph.iter().zip(block).map(|(a, b)| a * b).sum();
                *o += p[row] * acc;
            }
        }
    }

    fn adjoint(&self, r: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(r.len(), self.rows());
        out.iter_mut().for_each(|o| *o = ZERO);
        for (u, block) in out.chunks_exact_mut(self.s_d).enumerate() {
            let p = &self.preambles[u];
            for (row, &rv) in r.iter().enumerate() {
                let w = p[row].conj() * rv;
                let ph = &self.phases[row * self.s_d..(row + 1) * self.s_d];
                for (b, a) in block.iter_mut().zip(ph) {
                    *b += a.conj() * w;
                }
            }
        }
    }

    fn forward_on(&self, support: &[usize], vals: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|o| *o = ZERO);
        for (&j, &v) in support.iter().zip(vals) {
            if v == ZERO {
                continue;
            }
            for (row, o) in out.iter_mut().enumerate() {
                *o += self.entry(row, j) * v;
            }
        }
    }

    fn adjoint_on(&self, support: &[usize], r: &[Complex64], out: &mut [Complex64]) {
        for (o, &j) in out.iter_mut().zip(support) {
            *o = r.iter().enumerate().map(|(row, &rv)| self.entry(row, j).conj() * rv).sum();
        }
    }
}

/// Plain column-major matrix with block structure; used for generic solver
/// tests.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    rows: usize,
    blocks: usize,
    block_len: usize,
    data: Vec<Complex64>,
}

impl DenseOperator {
    pub fn new(rows: usize, blocks: usize, block_len: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * blocks * block_len);
        DenseOperator { rows, blocks, block_len, data }
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }
}

impl SensingOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }
    fn num_blocks(&self) -> usize {
        self.blocks
    }
    fn block_len(&self) -> usize {
        self.block_len
    }
    fn forward(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|o| *o = ZERO);
        for (j, &v) in x.iter().enumerate() {
            if v != ZERO {
                for (o, a) in out.iter_mut().zip(self.column(j)) {
                    *o += a * v;
                }
            }
        }
    }
    fn adjoint(&self, r: &[Complex64], out: &mut [Complex64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = crate::math::cdot(self.column(j), r);
        }
    }
}

/// Solver telemetry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    /// Residual norm `||A x - y||` after each outer iteration.
    pub residuals: Vec<f64>,
    /// Penalized objective trajectory (proximal solvers only).
    pub objective: Vec<f64>,
    pub converged: bool,
}

impl SolverReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub estimate: Vec<Complex64>,
    pub report: SolverReport,
}

pub(crate) fn residual<A: SensingOperator + ?Sized>(op: &A, x: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
    let mut r = alloc::vec![ZERO; op.rows()];
    op.forward(x, &mut r);
    for (ri, yi) in r.iter_mut().zip(y) {
        *ri = yi - *ri;
    }
    r
}

pub(crate) fn check_dims<A: SensingOperator + ?Sized>(op: &A, y: &[Complex64]) -> Result<(), SolveError> {
    if y.len() != op.rows() {
        return Err(SolveError::Dimension { expected: op.rows(), got: y.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cdot, complex_normal, norm};
    use crate::model::{validate, SystemConfig};
    use crate::seed::StreamSeed;

    fn small_operator(seed: u64) -> DirectOperator {
        let mut c = SystemConfig::scaled();
        c.n = 256;
        c.control_band = crate::model::ControlBand::Random(64);
        c.s_cp = 16;
        c.s_d = 8;
        c.k1 = 2;
        c.num_users = 6;
        c.k2 = 2;
        c.num_data_slots = 8;
        c.master_seed = seed;
        let cfg = validate(c).unwrap();
        DirectOperator::new(&PreambleSet::generate(&cfg, cfg.seed()), cfg.config().s_d)
    }

    #[test]
    fn restricted_forms_agree_with_full() {
        let op = small_operator(2);
        let mut rng = StreamSeed::new(4).rng("x");
        let support = [3usize, 9, 17, 40];
        let vals: Vec<Complex64> = support.iter().map(|_| complex_normal(&mut rng, 1.0)).collect();
        let mut x = alloc::vec![ZERO; op.cols()];
        for (&j, &v) in support.iter().zip(&vals) {
            x[j] = v;
        }
        let mut a = alloc::vec![ZERO; op.rows()];
        let mut b = alloc::vec![ZERO; op.rows()];
        op.forward(&x, &mut a);
        op.forward_on(&support, &vals, &mut b);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
        let r: Vec<Complex64> = (0..op.rows()).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let mut full = alloc::vec![ZERO; op.cols()];
        op.adjoint(&r, &mut full);
        let mut part = alloc::vec![ZERO; support.len()];
        op.adjoint_on(&support, &r, &mut part);
        for (k, &j) in support.iter().enumerate() {
            assert!((full[j] - part[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn direct_adjoint_is_consistent() {
        let op = small_operator(5);
        let mut rng = StreamSeed::new(6).rng("adj");
        for _ in 0..20 {
            let h: Vec<Complex64> = (0..op.cols()).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let r: Vec<Complex64> = (0..op.rows()).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let mut ah = alloc::vec![ZERO; op.rows()];
            let mut atr = alloc::vec![ZERO; op.cols()];
            op.forward(&h, &mut ah);
            op.adjoint(&r, &mut atr);
            let gap = (cdot(&r, &ah) - cdot(&atr, &h)).norm() / (norm(&h) * norm(&r));
            assert!(gap < 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn single_tap_column_readout() {
        let op = small_operator(8);
        let (u, l) = (3usize, 5usize);
        let mut x = alloc::vec![ZERO; op.cols()];
        x[u * op.block_len() + l] = Complex64::new(1.0, 0.0);
        let mut out = alloc::vec![ZERO; op.rows()];
        op.forward(&x, &mut out);
        for (i, &f) in op.band().iter().enumerate() {
            let expect = op.preamble_values(u)[i] * twiddle((f * l) as u64, op.n());
            assert!((out[i] - expect).norm() < 1e-12);
        }
        let energy = crate::math::norm_sqr(&out);
        // n * alpha with n = 256, alpha = 0.21
        assert!((energy - 256.0 * 0.21).abs() < 1e-9);
    }
}
