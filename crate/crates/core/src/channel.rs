//! Sparse multipath channels.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;

use crate::math::{complex_normal, twiddle};
use crate::model::CheckedConfig;
use crate::seed::StreamSeed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: usize,
    pub gain: Complex64,
}

/// Sampled impulse response of one user, stored as a tap list.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub user_id: usize,
    pub taps: Vec<Tap>,
}

impl ChannelRealization {
    pub fn identity(user_id: usize) -> Self {
        ChannelRealization { user_id, taps: alloc::vec![Tap { delay: 0, gain: Complex64::new(1.0, 0.0) }] }
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }

    pub fn max_delay(&self) -> Option<usize> {
        self.taps.iter().map(|t| t.delay).max()
    }

    /// `H_f = sum_l h_l exp(-i 2 pi f l / n)` (equals `sqrt(n)` times the
    /// unitary DFT of the zero-padded impulse response).
    pub fn response_at(&self, f: usize, n: usize) -> Complex64 {
        self.taps
            .iter()
            .map(|t| t.gain * twiddle(f as u64 * t.delay as u64, n))
            .sum()
    }

    pub fn response_on(&self, subcarriers: &[usize], n: usize) -> Vec<Complex64> {
        subcarriers.iter().map(|&f| self.response_at(f, n)).collect()
    }

    /// Dense tap vector of length `len` (the block `h_u` of the stacked
    /// unknown). Taps at or beyond `len` are dropped.
    pub fn dense(&self, len: usize) -> Vec<Complex64> {
        let mut out = alloc::vec![Complex64::new(0.0, 0.0); len];
        for t in &self.taps {
            if t.delay < len {
                out[t.delay] += t.gain;
            }
        }
        out
    }
}

/// Draws one channel: `k1` distinct delays uniform on `[0, s_d)`, i.i.d.
/// `CN(0, 1/k1)` gains.
pub fn gen_channel<R: Rng + ?Sized>(user_id: usize, k1: usize, s_d: usize, rng: &mut R) -> ChannelRealization {
    let var = 1.0 / k1 as f64;
    let mut delays = index::sample(rng, s_d, k1).into_vec();
    delays.sort_unstable();
    let taps = delays
        .into_iter()
        .map(|delay| Tap { delay, gain: complex_normal(rng, var) })
        .collect();
    ChannelRealization { user_id, taps }
}

/// Independent channels for the active users. Each user's draw uses its own
/// stream, so the realization of user `u` does not depend on who else is
/// active.
pub fn gen_channels(cfg: &CheckedConfig, active_users: &[usize], seed: StreamSeed) -> Vec<ChannelRealization> {
    let c = cfg.config();
    active_users
        .iter()
        .map(|&u| {
            let mut rng = seed.derive(u as u64).rng("channel");
            gen_channel(u, c.k1, c.s_d, &mut rng)
        })
        .collect()
}
