//! CoSaMP with a pluggable sparsity projection. With the hierarchical
//! projection this is HiCoSaMP: proxy selection keeps `2*k2` blocks of `2*k1`
//! taps, pruning keeps `k2` blocks of `k1` taps.

use alloc::vec::Vec;

use num_complex::Complex64;

use super::threshold::restrict;
use super::{cgls_on_support, check_dims, residual, Recovery, SensingOperator, SolveError, SolverReport, Sparsity};
use crate::math::norm;

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOptions {
    pub max_iter: usize,
    /// Stop once `||r|| <= rel_tol * ||y||`.
    pub rel_tol: f64,
    /// Stop once `||r||` falls to this absolute level (e.g. the noise norm).
    pub target_residual: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions { max_iter: 50, rel_tol: 1e-10, target_residual: 0.0, cg_tol: 1e-8, cg_max_iter: 200 }
    }
}

pub fn hicosamp_solve<A: SensingOperator + ?Sized>(
    op: &A,
    y: &[Complex64],
    k2: usize,
    k1: usize,
    opts: &GreedyOptions,
) -> Result<Recovery, SolveError> {
    if k1 * k2 > op.rows() {
        return Err(SolveError::Budget { k: k1 * k2, m: op.rows() });
    }
    cosamp_core(op, y, Sparsity::Hierarchical { k2, k1 }, opts)
}

/// Unstructured CoSaMP with `k` total nonzeros.
pub fn cosamp_solve<A: SensingOperator + ?Sized>(
    op: &A,
    y: &[Complex64],
    k: usize,
    opts: &GreedyOptions,
) -> Result<Recovery, SolveError> {
    if k > op.rows() {
        return Err(SolveError::Budget { k, m: op.rows() });
    }
    cosamp_core(op, y, Sparsity::Flat { k }, opts)
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&z)) if x == z => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&z)) if x < z => {
                i += 1;
                x
            }
            (Some(_), Some(&z)) => {
                j += 1;
                z
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&z)) => {
                j += 1;
                z
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

fn support_of(x: &[Complex64]) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i].norm_sqr() > 0.0).collect()
}

fn cosamp_core<A: SensingOperator + ?Sized>(
    op: &A,
    y: &[Complex64],
    sparsity: Sparsity,
    opts: &GreedyOptions,
) -> Result<Recovery, SolveError> {
    check_dims(op, y)?;
    let cols = op.cols();
    let block_len = op.block_len();
    let zero = Complex64::new(0.0, 0.0);
    let y_norm = norm(y);
    let mut x = alloc::vec![zero; cols];
    let mut report = SolverReport::default();
    if y_norm == 0.0 {
        report.converged = true;
        report.residuals.push(0.0);
        return Ok(Recovery { estimate: x, report });
    }
    let stop_level = (opts.rel_tol * y_norm).max(opts.target_residual);
    let mut r = y.to_vec();
    let mut r_norm = y_norm;
    let mut proxy = alloc::vec![zero; cols];

    while report.iterations < opts.max_iter {
        report.iterations += 1;
        op.adjoint(&r, &mut proxy);
        let omega = sparsity.doubled().support(&proxy, block_len);
        let merged = merge_sorted(&omega, &support_of(&x));
        let warm: Vec<Complex64> = merged.iter().map(|&j| x[j]).collect();
        let ls = cgls_on_support(op, &merged, y, None, Some(&warm), opts.cg_tol, opts.cg_max_iter);
        let mut b = alloc::vec![zero; cols];
        for (&j, &v) in merged.iter().zip(&ls.values) {
            b[j] = v;
        }
        let keep = sparsity.support(&b, block_len);
        restrict(&mut b, &keep);
        // Refit on the pruned support.
        let warm: Vec<Complex64> = keep.iter().map(|&j| b[j]).collect();
        let refit = cgls_on_support(op, &keep, y, None, Some(&warm), opts.cg_tol, opts.cg_max_iter);
        let mut candidate = alloc::vec![zero; cols];
        for (&j, &v) in keep.iter().zip(&refit.values) {
            candidate[j] = v;
        }
        let r_new = residual(op, &candidate, y);
        let new_norm = norm(&r_new);
        if new_norm >= r_norm {
            // Stagnation: keep the previous iterate.
            report.residuals.push(r_norm);
            report.converged = true;
            break;
        }
        x = candidate;
        r = r_new;
        r_norm = new_norm;
        report.residuals.push(r_norm);
        if r_norm <= stop_level {
            report.converged = true;
            break;
        }
    }
    Ok(Recovery { estimate: x, report })
}
