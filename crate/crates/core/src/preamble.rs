//! Preamble signatures and the replica patterns they address.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;

use crate::math::unit_phase;
use crate::model::CheckedConfig;
use crate::seed::StreamSeed;

/// Replica placement addressed by one preamble.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotPattern {
    /// Sorted, distinct slot indices; `slots.len()` is the degree.
    pub slots: Vec<usize>,
}

impl SlotPattern {
    pub fn degree(&self) -> usize {
        self.slots.len()
    }
}

/// Deterministic map preamble index -> replica pattern. Patterns are drawn
/// lazily from a per-index stream, so arbitrarily large preamble spaces cost
/// nothing until used.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMap {
    seed: StreamSeed,
    num_slots: usize,
    cumulative: Vec<(usize, f64)>,
}

impl PatternMap {
    /// `degree_dist` is the node-oriented distribution `Lambda` as
    /// `(degree, probability)` pairs; it must already be validated.
    pub fn new(seed: StreamSeed, num_slots: usize, degree_dist: &[(usize, f64)]) -> Self {
        let mut acc = 0.0;
        let cumulative = degree_dist
            .iter()
            .map(|&(d, p)| {
                acc += p;
                (d, acc)
            })
            .collect();
        PatternMap { seed: seed.labeled("pattern-map"), num_slots, cumulative }
    }

    pub fn from_config(cfg: &CheckedConfig) -> Self {
        PatternMap::new(cfg.seed(), cfg.num_slots(), &cfg.config().degree_dist)
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn pattern(&self, preamble: u64) -> SlotPattern {
        let mut rng = self.seed.derive(preamble).rng("pattern");
        let u: f64 = rng.gen();
        let last = self.cumulative.last().map(|c| c.0).unwrap_or(1);
        let degree = self.cumulative.iter().find(|&&(_, c)| u < c).map(|c| c.0).unwrap_or(last);
        let mut slots = index::sample(&mut rng, self.num_slots, degree.min(self.num_slots)).into_vec();
        slots.sort_unstable();
        SlotPattern { slots }
    }
}

/// The `U` frequency-domain signatures `p_hat_u`, stored on the control band
/// only (they are zero elsewhere).
#[derive(Debug, Clone)]
pub struct PreambleSet {
    n: usize,
    band: Vec<usize>,
    alpha: f64,
    /// `values[u][i]` is `p_hat_u` at subcarrier `band[i]`.
    values: Vec<Vec<Complex64>>,
    patterns: PatternMap,
}

impl PreambleSet {
    /// Random-phase constant-modulus sequences on the control band, scaled so
    /// that `||p_u||^2 = n * alpha`.
    pub fn generate(cfg: &CheckedConfig, seed: StreamSeed) -> Self {
        let c = cfg.config();
        let m = cfg.m();
        let amp = (c.n as f64 * c.alpha / m as f64).sqrt();
        let values = (0..c.num_users)
            .map(|u| {
                let mut rng = seed.derive(u as u64).rng("preamble");
                (0..m).map(|_| unit_phase(&mut rng) * amp).collect()
            })
            .collect();
        PreambleSet {
            n: c.n,
            band: cfg.band().to_vec(),
            alpha: c.alpha,
            values,
            patterns: PatternMap::new(seed, cfg.num_slots(), &c.degree_dist),
        }
    }

    /// Preambles built from caller-supplied band values (one row per user).
    pub fn from_values(n: usize, band: Vec<usize>, values: Vec<Vec<Complex64>>, patterns: PatternMap) -> Self {
        let alpha = values.first().map(|v| crate::math::norm_sqr(v) / n as f64).unwrap_or(0.0);
        PreambleSet { n, band, alpha, values, patterns }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn band(&self) -> &[usize] {
        &self.band
    }

    pub fn num_users(&self) -> usize {
        self.values.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Band values of user `u`'s preamble.
    pub fn band_values(&self, u: usize) -> &[Complex64] {
        &self.values[u]
    }

    /// Full-length frequency-domain preamble.
    pub fn freq_vector(&self, u: usize) -> Vec<Complex64> {
        let mut out = alloc::vec![Complex64::new(0.0, 0.0); self.n];
        for (&f, &v) in self.band.iter().zip(&self.values[u]) {
            out[f] = v;
        }
        out
    }

    pub fn patterns(&self) -> &PatternMap {
        &self.patterns
    }

    pub fn pattern(&self, u: usize) -> SlotPattern {
        self.patterns.pattern(u as u64)
    }

    /// With `alpha = 0` the preambles vanish and activity detection is
    /// impossible; the set is still usable as a data-only baseline.
    pub fn is_degenerate(&self) -> bool {
        self.alpha == 0.0
    }

    /// Largest normalized cross-correlation `|<p_u, p_v>| / (n alpha)` over
    /// distinct pairs.
    pub fn max_coherence(&self) -> f64 {
        let scale = self.n as f64 * self.alpha;
        let mut worst: f64 = 0.0;
        for u in 0..self.values.len() {
            for v in u + 1..self.values.len() {
                let c = crate::math::cdot(&self.values[u], &self.values[v]).norm() / scale;
                worst = worst.max(c);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::norm_sqr;
    use crate::model::{validate, SystemConfig};
    use alloc::vec;

    #[test]
    fn energy_and_support() {
        let mut c = SystemConfig::scaled();
        c.alpha = 0.37;
        let cfg = validate(c).unwrap();
        let p = PreambleSet::generate(&cfg, cfg.seed());
        let mut in_band = vec![false; cfg.n()];
        for &f in cfg.band() {
            in_band[f] = true;
        }
        for u in 0..p.num_users() {
            let full = p.freq_vector(u);
            let e = norm_sqr(&full);
            assert!((e - 2048.0 * 0.37).abs() < 1e-9 * e);
            let outside: f64 = full.iter().enumerate().filter(|(f, _)| !in_band[*f]).map(|(_, v)| v.norm_sqr()).sum();
            assert_eq!(outside, 0.0);
            let modulus = (2048.0 * 0.37 / cfg.m() as f64).sqrt();
            assert!(p.band_values(u).iter().all(|v| (v.norm() - modulus).abs() < 1e-12));
        }
    }

    #[test]
    fn coherence_at_full_scale() {
        let mut c = SystemConfig::full_scale();
        c.alpha = 0.5;
        let cfg = validate(c).unwrap();
        let p = PreambleSet::generate(&cfg, cfg.seed());
        let mu = p.max_coherence();
        // Random phases: pairwise |<p_u,p_v>|/(n alpha) ~ Rayleigh with scale
        // 1/sqrt(2m); the max over 4950 pairs sits near 4/sqrt(m).
        let scale = 1.0 / (cfg.m() as f64).sqrt();
        assert!(mu < 1.0);
        assert!(mu > scale && mu < 6.0 * scale, "coherence {mu}, m^-1/2 = {scale}");
    }

    #[test]
    fn patterns_are_deterministic_and_distinct() {
        let map = PatternMap::new(StreamSeed::new(11), 40, &[(2, 0.5), (4, 0.5)]);
        let mut deg = [0usize; 5];
        for u in 0..2000u64 {
            let a = map.pattern(u);
            assert_eq!(a, map.pattern(u));
            assert!(a.degree() == 2 || a.degree() == 4);
            deg[a.degree()] += 1;
            for w in a.slots.windows(2) {
                assert!(w[0] < w[1]);
            }
            assert!(a.slots.iter().all(|&s| s < 40));
        }
        assert!((deg[2] as i64 - 1000).abs() < 150);
    }

    #[test]
    fn alpha_zero_is_degenerate() {
        let mut c = SystemConfig::scaled();
        c.alpha = 0.0;
        let cfg = validate(c).unwrap();
        let p = PreambleSet::generate(&cfg, cfg.seed());
        assert!(p.is_degenerate());
        assert_eq!(norm_sqr(&p.freq_vector(0)), 0.0);
    }
}
