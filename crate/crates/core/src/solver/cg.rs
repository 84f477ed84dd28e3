//! Conjugate gradients on the normal equations of a column-restricted system
//! (CGLS form, which never forms `A_S^* A_S`).

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::SensingOperator;
use crate::math::norm_sqr;

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub values: Vec<Complex64>,
    pub iterations: usize,
    /// `||rhs - A_S^* A_S z|| / ||rhs||` at exit.
    pub relative_residual: f64,
}

/// Solves `A_S^* A_S z = A_S^* b - shift` on the columns `support`, starting
/// from `x0` (zeros when `None`). With `shift = None` this is the
/// least-squares fit `min_z ||A_S z - b||`.
pub fn cgls_on_support<A: SensingOperator + ?Sized>(
    op: &A,
    support: &[usize],
    b: &[Complex64],
    shift: Option<&[Complex64]>,
    x0: Option<&[Complex64]>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let k = support.len();
    let zero = Complex64::new(0.0, 0.0);
    if k == 0 {
        return CgOutcome { values: Vec::new(), iterations: 0, relative_residual: 0.0 };
    }
    let m = op.rows();
    let mut x: Vec<Complex64> = match x0 {
        Some(v) => v.to_vec(),
        None => alloc::vec![zero; k],
    };

    let mut rhs = alloc::vec![zero; k];
    op.adjoint_on(support, b, &mut rhs);
    if let Some(sh) = shift {
        for (r, s) in rhs.iter_mut().zip(sh) {
            *r -= s;
        }
    }
    let ref_norm = norm_sqr(&rhs).sqrt();
    if ref_norm == 0.0 {
        return CgOutcome { values: alloc::vec![zero; k], iterations: 0, relative_residual: 0.0 };
    }

    let mut ax = alloc::vec![zero; m];
    let mut s = alloc::vec![zero; k];
    let normal_residual = |x: &[Complex64], ax: &mut [Complex64], s: &mut [Complex64]| {
        op.forward_on(support, x, ax);
        op.adjoint_on(support, ax, s);
        for (si, ri) in s.iter_mut().zip(&rhs) {
            *si = ri - *si;
        }
    };
    normal_residual(&x, &mut ax, &mut s);
    let mut gamma = norm_sqr(&s);
    let mut p = s.clone();
    let mut q = alloc::vec![zero; m];
    let mut atq = alloc::vec![zero; k];
    let mut iterations = 0;
    while iterations < max_iter && gamma.sqrt() > tol * ref_norm {
        op.forward_on(support, &p, &mut q);
        let qq = norm_sqr(&q);
        if qq == 0.0 {
            break;
        }
        let step = gamma / qq;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += pi * step;
        }
        iterations += 1;
        if iterations % 50 == 0 {
            // Periodic recomputation keeps the recursive residual honest.
            normal_residual(&x, &mut ax, &mut s);
        } else {
            op.adjoint_on(support, &q, &mut atq);
            for (si, ti) in s.iter_mut().zip(&atq) {
                *si -= ti * step;
            }
        }
        let gamma_new = norm_sqr(&s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + *pi * beta;
        }
    }
    CgOutcome { values: x, iterations, relative_residual: gamma.sqrt() / ref_norm }
}
