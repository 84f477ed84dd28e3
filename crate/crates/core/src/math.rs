//! Small numeric helpers shared across modules.

#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

/// `exp(-i 2 pi k / n)` with `k` reduced modulo `n` before scaling.
#[inline]
pub fn twiddle(k: u64, n: usize) -> Complex64 {
    let r = (k % n as u64) as f64;
    let theta = -2.0 * PI * r / n as f64;
    Complex64::new(libm::cos(theta), libm::sin(theta))
}

/// Hermitian inner product `<a, b> = sum conj(a_i) b_i`.
pub fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// Standard normal draw (Box-Muller, one output per call).
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // u1 in (0, 1] keeps the log finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * libm::cos(2.0 * PI * u2)
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    Complex64::new(s * std_normal(rng), s * std_normal(rng))
}

/// Uniform point on the unit circle.
pub fn unit_phase<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let theta = 2.0 * PI * rng.gen::<f64>();
    Complex64::new(libm::cos(theta), libm::sin(theta))
}

/// Gaussian tail function `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::StreamSeed;

    #[test]
    fn twiddle_reduces_large_arguments() {
        let n = 2048;
        let a = twiddle(5, n);
        let b = twiddle(5 + 1000 * n as u64, n);
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn complex_normal_has_requested_variance() {
        let mut rng = StreamSeed::trial_rng(1, 0, "t");
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += complex_normal(&mut rng, 2.0).norm_sqr();
        }
        let mean = acc / n as f64;
        assert!((mean - 2.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn q_function_known_points() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((q_function(1.0) - 0.158_655_253_931_457).abs() < 1e-12);
    }
}
