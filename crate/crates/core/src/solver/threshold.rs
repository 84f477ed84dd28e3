//! Sparsity projections and activity thresholding.

use alloc::vec::Vec;
use core::cmp::Ordering;

use num_complex::Complex64;

/// Structure imposed by a greedy solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sparsity {
    /// At most `k2` active blocks, each with at most `k1` nonzeros.
    Hierarchical { k2: usize, k1: usize },
    /// At most `k` nonzeros anywhere.
    Flat { k: usize },
}

impl Sparsity {
    pub fn doubled(self) -> Sparsity {
        match self {
            Sparsity::Hierarchical { k2, k1 } => Sparsity::Hierarchical { k2: 2 * k2, k1: 2 * k1 },
            Sparsity::Flat { k } => Sparsity::Flat { k: 2 * k },
        }
    }

    pub fn budget(self) -> usize {
        match self {
            Sparsity::Hierarchical { k2, k1 } => k2 * k1,
            Sparsity::Flat { k } => k,
        }
    }

    /// Sorted support of the projection of `x`.
    pub fn support(self, x: &[Complex64], block_len: usize) -> Vec<usize> {
        match self {
            Sparsity::Hierarchical { k2, k1 } => hier_threshold(x, block_len, k2, k1),
            Sparsity::Flat { k } => flat_threshold(x, k),
        }
    }
}

fn by_magnitude_desc(x: &[Complex64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| x[b].norm_sqr().partial_cmp(&x[a].norm_sqr()).unwrap_or(Ordering::Equal).then(a.cmp(&b))
}

/// Support of the `k` largest-magnitude nonzero entries (ties to the lower
/// index).
pub fn flat_threshold(x: &[Complex64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).filter(|&i| x[i].norm_sqr() > 0.0).collect();
    if idx.len() > k {
        idx.select_nth_unstable_by(k, by_magnitude_desc(x));
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

/// Hierarchical thresholding: keep the `k1` largest entries inside every
/// block, then keep the `k2` blocks whose retained entries carry the most
/// energy. Returns the sorted support of the nonzero survivors.
pub fn hier_threshold(x: &[Complex64], block_len: usize, k2: usize, k1: usize) -> Vec<usize> {
    let blocks = x.len() / block_len;
    let mut per_block: Vec<(usize, f64, Vec<usize>)> = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let slice = &x[b * block_len..(b + 1) * block_len];
        let keep = flat_threshold(slice, k1);
        if keep.is_empty() {
            continue;
        }
        let energy: f64 = keep.iter().map(|&i| slice[i].norm_sqr()).sum();
        per_block.push((b, energy, keep));
    }
    per_block.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    per_block.truncate(k2);
    let mut support: Vec<usize> =
        per_block.into_iter().flat_map(|(b, _, keep)| keep.into_iter().map(move |i| b * block_len + i)).collect();
    support.sort_unstable();
    support
}

/// Zeroes everything outside `support`.
pub fn restrict(x: &mut [Complex64], support: &[usize]) {
    let mut keep = alloc::vec![false; x.len()];
    for &i in support {
        keep[i] = true;
    }
    for (v, k) in x.iter_mut().zip(keep) {
        if !k {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

/// Per-user block energies and the users declared active.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityEstimate {
    pub h_hat: Vec<Complex64>,
    pub user_norms: Vec<f64>,
    pub detected: Vec<usize>,
    pub threshold: f64,
}

impl ActivityEstimate {
    pub fn is_detected(&self, u: usize) -> bool {
        self.detected.binary_search(&u).is_ok()
    }

    pub fn block(&self, u: usize) -> &[Complex64] {
        let len = self.h_hat.len() / self.user_norms.len();
        &self.h_hat[u * len..(u + 1) * len]
    }
}

/// A user is declared active iff `||h_hat_u||^2 > xi`.
pub fn detect_activity(h_hat: Vec<Complex64>, block_len: usize, xi: f64) -> ActivityEstimate {
    let user_norms: Vec<f64> =
        h_hat.chunks_exact(block_len).map(|b| b.iter().map(|v| v.norm_sqr()).sum()).collect();
    let detected = user_norms.iter().enumerate().filter(|(_, &e)| e > xi).map(|(u, _)| u).collect();
    ActivityEstimate { h_hat, user_norms, detected, threshold: xi }
}
