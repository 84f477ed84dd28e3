//! Basis pursuit denoising,
//!
//! ```text
//! min ||h||_1  s.t.  ||A h - y|| <= eps,
//! ```
//!
//! solved through its penalized form `1/2 ||A h - y||^2 + lambda ||h||_1`.
//! For a given `lambda` the penalized problem runs monotone FISTA; every few
//! iterations the current support and phases are handed to an active-set
//! polish that solves the optimality conditions on the support exactly and
//! checks them off the support. The residual norm is nondecreasing in
//! `lambda`, so the outer loop searches `lambda` (continuation from
//! `||A^* y||_inf`, then safeguarded log-secant bisection) until the residual
//! hits `eps`.
//!
//! The l1 norm of a complex vector is the sum of magnitudes, so the proximal
//! step shrinks magnitudes and keeps phases.

use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use super::{cgls_on_support, check_dims, residual, Recovery, SensingOperator, SolveError, SolverReport};
use crate::math::{norm, norm_sqr, twiddle};

#[derive(Debug, Clone, PartialEq)]
pub struct BpdnOptions {
    /// Accept when `| ||A h - y|| - eps | <= tol_feas * eps`.
    pub tol_feas: f64,
    /// Maximum number of penalized solves in the `lambda` search.
    pub max_lambda_steps: usize,
    /// FISTA iterations per penalized solve.
    pub max_iter: usize,
    /// Attempt the active-set polish every this many iterations.
    pub polish_every: usize,
    pub polish_tol: f64,
    pub cg_max_iter: usize,
    pub power_iter: usize,
    /// Smallest factor by which one continuation step may shrink `lambda`.
    pub min_shrink: f64,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        BpdnOptions {
            tol_feas: 0.01,
            max_lambda_steps: 60,
            max_iter: 3000,
            polish_every: 10,
            polish_tol: 1e-13,
            cg_max_iter: 500,
            power_iter: 60,
            min_shrink: 0.1,
        }
    }
}

pub fn lasso_objective<A: SensingOperator + ?Sized>(op: &A, x: &[Complex64], y: &[Complex64], lambda: f64) -> f64 {
    let r = residual(op, x, y);
    0.5 * norm_sqr(&r) + lambda * l1(x)
}

fn l1(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm()).sum()
}

fn soft(v: Complex64, t: f64) -> Complex64 {
    let a = v.norm();
    if a <= t {
        Complex64::new(0.0, 0.0)
    } else {
        v * ((a - t) / a)
    }
}

/// Estimate of `||A||^2` by power iteration on `A^* A`, inflated by 5%.
fn lipschitz<A: SensingOperator + ?Sized>(op: &A, iters: usize) -> f64 {
    let cols = op.cols();
    let mut v: Vec<Complex64> = (0..cols).map(|j| twiddle((j as u64).wrapping_mul(7919), 1031)).collect();
    let mut av = alloc::vec![Complex64::new(0.0, 0.0); op.rows()];
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let nv = norm(&v);
        if nv == 0.0 {
            return 1.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        op.forward(&v, &mut av);
        op.adjoint(&av, &mut v);
        est = norm(&v);
    }
    if est > 0.0 {
        est * 1.05
    } else {
        1.0
    }
}

struct LassoWork<'a, A: SensingOperator + ?Sized> {
    op: &'a A,
    y: &'a [Complex64],
    lipschitz: f64,
    opts: &'a BpdnOptions,
}

impl<A: SensingOperator + ?Sized> LassoWork<'_, A> {
    fn objective_from(&self, ax: &[Complex64], x: &[Complex64], lambda: f64) -> f64 {
        let r: f64 = ax.iter().zip(self.y).map(|(a, b)| (a - b).norm_sqr()).sum();
        0.5 * r + lambda * l1(x)
    }

    /// Monotone FISTA with periodic active-set polish. Returns the iterate,
    /// the objective trajectory and the iteration count.
    fn solve(&self, lambda: f64, x0: &[Complex64]) -> (Vec<Complex64>, Vec<f64>, usize, bool) {
        let op = self.op;
        let (m, cols) = (op.rows(), op.cols());
        let zero = Complex64::new(0.0, 0.0);
        let step = 1.0 / self.lipschitz;

        let mut x = x0.to_vec();
        let mut ax = alloc::vec![zero; m];
        op.forward(&x, &mut ax);
        let mut fx = self.objective_from(&ax, &x, lambda);
        let mut objective = alloc::vec![fx];

        let mut yk = x.clone();
        let mut ayk = ax.clone();
        let mut t = 1.0;
        let mut grad = alloc::vec![zero; cols];
        let mut resid = alloc::vec![zero; m];
        let mut z = alloc::vec![zero; cols];
        let mut az = alloc::vec![zero; m];

        for it in 1..=self.opts.max_iter {
            for ((r, a), b) in resid.iter_mut().zip(&ayk).zip(self.y) {
                *r = a - b;
            }
            op.adjoint(&resid, &mut grad);
            for ((zi, yi), gi) in z.iter_mut().zip(&yk).zip(&grad) {
                *zi = soft(yi - gi * step, lambda * step);
            }
            op.forward(&z, &mut az);
            let fz = self.objective_from(&az, &z, lambda);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let x_prev = core::mem::take(&mut x);
            let ax_prev = core::mem::take(&mut ax);
            let took_z = fz <= fx;
            if took_z {
                x = z.clone();
                ax = az.clone();
                fx = fz;
            } else {
                x = x_prev.clone();
                ax = ax_prev.clone();
            }
            objective.push(fx);
            let c1 = t / t_next;
            let c2 = (t - 1.0) / t_next;
            for j in 0..cols {
                yk[j] = x[j] + (z[j] - x[j]) * c1 + (x[j] - x_prev[j]) * c2;
            }
            for i in 0..m {
                ayk[i] = ax[i] + (az[i] - ax[i]) * c1 + (ax[i] - ax_prev[i]) * c2;
            }
            t = t_next;

            if it % self.opts.polish_every == 0 {
                if let Some(p) = self.polish(lambda, &x) {
                    let fp = lasso_objective(op, &p, self.y, lambda);
                    if fp <= fx * (1.0 + 1e-12) + 1e-300 {
                        objective.push(fp.min(fx));
                        return (p, objective, it, true);
                    }
                }
            }
            let moved: f64 = x.iter().zip(&x_prev).map(|(a, b)| (a - b).norm_sqr()).sum();
            if took_z && moved <= 1e-30 * norm_sqr(&x).max(1e-300) {
                return (x, objective, it, true);
            }
        }
        let iters = self.opts.max_iter;
        (x, objective, iters, false)
    }

    /// Solves the optimality conditions on the support of `x`:
    /// `A_S^* (y - A_S z) = lambda * z / |z|`, iterating on the phases, then
    /// verifies `|A^* (y - A z)|_j <= lambda` off the support.
    fn polish(&self, lambda: f64, x: &[Complex64]) -> Option<Vec<Complex64>> {
        let op = self.op;
        let mut support: Vec<usize> = (0..x.len()).filter(|&j| x[j].norm_sqr() > 0.0).collect();
        let mut vals: Vec<Complex64> = support.iter().map(|&j| x[j]).collect();
        let mut settled = support.is_empty();
        for _ in 0..40 {
            if support.is_empty() {
                settled = true;
                break;
            }
            let phases: Vec<Complex64> = vals.iter().map(|v| v / v.norm()).collect();
            let shift: Vec<Complex64> = phases.iter().map(|p| p * lambda).collect();
            let sol = cgls_on_support(
                op,
                &support,
                self.y,
                Some(&shift),
                Some(&vals),
                self.opts.polish_tol,
                self.opts.cg_max_iter,
            );
            let consistent: Vec<bool> =
                sol.values.iter().zip(&phases).map(|(s, p)| (p.conj() * s).re > 0.0).collect();
            if consistent.iter().any(|c| !c) {
                let mut s2 = Vec::with_capacity(support.len());
                let mut v2 = Vec::with_capacity(support.len());
                for ((&j, &v), ok) in support.iter().zip(&sol.values).zip(&consistent) {
                    if *ok {
                        s2.push(j);
                        v2.push(v);
                    }
                }
                support = s2;
                vals = v2;
                continue;
            }
            let change = sol
                .values
                .iter()
                .zip(&phases)
                .map(|(s, p)| (s / s.norm() - p).norm())
                .fold(0.0, f64::max);
            vals = sol.values;
            if change < 1e-11 {
                settled = true;
                break;
            }
        }
        if !settled {
            return None;
        }
        let mut z = alloc::vec![Complex64::new(0.0, 0.0); x.len()];
        for (&j, &v) in support.iter().zip(&vals) {
            z[j] = v;
        }
        let r = residual(op, &z, self.y);
        let mut g = alloc::vec![Complex64::new(0.0, 0.0); x.len()];
        op.adjoint(&r, &mut g);
        let mut on = alloc::vec![false; x.len()];
        for &j in &support {
            on[j] = true;
        }
        let limit = lambda * (1.0 + 1e-7);
        if g.iter().zip(&on).any(|(gj, &s)| !s && gj.norm() > limit) {
            return None;
        }
        Some(z)
    }
}

/// Penalized solve at a fixed `lambda` from a zero start. The report's
/// `objective` carries the per-iteration objective values.
pub fn lasso_solve<A: SensingOperator + ?Sized>(
    op: &A,
    y: &[Complex64],
    lambda: f64,
    opts: &BpdnOptions,
) -> Result<Recovery, SolveError> {
    check_dims(op, y)?;
    let work = LassoWork { op, y, lipschitz: lipschitz(op, opts.power_iter), opts };
    let x0 = alloc::vec![Complex64::new(0.0, 0.0); op.cols()];
    let (x, objective, iterations, converged) = work.solve(lambda, &x0);
    let res = norm(&residual(op, &x, y));
    Ok(Recovery { estimate: x, report: SolverReport { iterations, residuals: alloc::vec![res], objective, converged } })
}

pub fn bpdn_solve<A: SensingOperator + ?Sized>(
    op: &A,
    y: &[Complex64],
    eps: f64,
    opts: &BpdnOptions,
) -> Result<Recovery, SolveError> {
    check_dims(op, y)?;
    if !(eps >= 0.0) {
        return Err(SolveError::Epsilon(eps));
    }
    let cols = op.cols();
    let zero = Complex64::new(0.0, 0.0);
    let y_norm = norm(y);
    let mut report = SolverReport::default();
    if y_norm <= eps {
        report.converged = true;
        report.residuals.push(y_norm);
        return Ok(Recovery { estimate: alloc::vec![zero; cols], report });
    }

    let mut aty = alloc::vec![zero; cols];
    op.adjoint(y, &mut aty);
    let lambda_max = aty.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let work = LassoWork { op, y, lipschitz: lipschitz(op, opts.power_iter), opts };

    let target_lo = eps * (1.0 - opts.tol_feas);
    let target_hi = eps * (1.0 + opts.tol_feas);
    let mut lo: Option<(f64, f64)> = None;
    let mut hi: (f64, f64) = (lambda_max, y_norm);
    let mut best_feasible: Option<(Vec<Complex64>, f64)> = None;
    let mut x = alloc::vec![zero; cols];
    let mut lambda = 0.5 * lambda_max;

    for _ in 0..opts.max_lambda_steps {
        let (sol, objective, iters, _) = work.solve(lambda, &x);
        report.iterations += iters;
        report.objective = objective;
        x = sol;
        let rho = norm(&residual(op, &x, y));
        report.residuals.push(rho);
        if (target_lo..=target_hi).contains(&rho) || (eps == 0.0 && rho == 0.0) {
            report.converged = true;
            return Ok(Recovery { estimate: x, report });
        }
        if rho < eps {
            lo = Some((lambda, rho));
            best_feasible = Some((x.clone(), rho));
        } else {
            hi = (lambda, rho);
        }
        lambda = match lo {
            None => {
                // Residual is close to linear in lambda once the support has
                // settled; cap the jump to keep warm starts useful.
                let guess = lambda * eps / rho;
                guess.max(lambda * opts.min_shrink)
            }
            Some((l_lo, r_lo)) => {
                let (l_hi, r_hi) = hi;
                let (ll, lh) = (l_lo.ln(), l_hi.ln());
                let (rl, rh) = (r_lo.max(1e-300).ln(), r_hi.max(1e-300).ln());
                let frac = if rh > rl { ((eps.ln() - rl) / (rh - rl)).clamp(0.1, 0.9) } else { 0.5 };
                (ll + frac * (lh - ll)).exp()
            }
        };
        if let Some((l_lo, _)) = lo {
            if hi.0 / l_lo < 1.0 + 1e-9 {
                break;
            }
        }
    }
    match best_feasible {
        Some((xb, rho)) => {
            report.residuals.push(rho);
            Ok(Recovery { estimate: xb, report })
        }
        None => Ok(Recovery { estimate: x, report }),
    }
}
