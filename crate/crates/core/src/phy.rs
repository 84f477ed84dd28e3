//! Per-slot data-plane processing: one-tap equalization, hard demapping,
//! replica cancellation with residual bookkeeping, SINR and capture.
//!
//! Slot observations live in the unitary-DFT domain, where an active user
//! contributes `H_f * a * s_f` on subcarrier `f` (channel response `H_f`,
//! per-subcarrier amplitude `a`, unit-energy symbol `s_f`) and noise has
//! variance `noise_var`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::model::Modulation;
use crate::stats::Proportion;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("channel estimate is zero on every subcarrier of slot {0}")]
    Undecodable(usize),
    #[error("user {user} is not (or no longer) present in slot {slot}")]
    NotInSlot { user: usize, slot: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Received samples of one frequency slot plus what the receiver knows about
/// it.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotObservation {
    pub slot: usize,
    pub y: Vec<Complex64>,
    /// Expected power left behind by imperfect cancellations, per subcarrier.
    pub residual_power: Vec<f64>,
    /// Users still present (not yet cancelled).
    pub users: Vec<usize>,
    /// Degree of the slot before any cancellation.
    pub degree: usize,
}

impl SlotObservation {
    pub fn new(slot: usize, y: Vec<Complex64>, users: Vec<usize>) -> Self {
        let w = y.len();
        let degree = users.len();
        SlotObservation { slot, y, residual_power: alloc::vec![0.0; w], users, degree }
    }

    pub fn width(&self) -> usize {
        self.y.len()
    }

    pub fn cancelled(&self) -> usize {
        self.degree - self.users.len()
    }

    pub fn energy(&self) -> f64 {
        crate::math::norm_sqr(&self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    /// Decided unit-energy symbols.
    pub symbols: Vec<Complex64>,
    pub bits: Vec<u8>,
    /// RMS error vector magnitude relative to the symbol amplitude
    /// (infinite when the amplitude is zero).
    pub evm: f64,
}

/// One-tap equalization `x_f = y_f / H_est_f`, nearest-point demapping.
///
/// `amplitude` is the per-subcarrier data amplitude `a`; decisions do not
/// depend on it for BPSK/QPSK, only the EVM does.
pub fn equalize_demod(
    obs: &SlotObservation,
    h_est: &[Complex64],
    modulation: Modulation,
    amplitude: f64,
) -> Result<Demodulated, PhyError> {
    if h_est.len() != obs.width() {
        return Err(PhyError::LengthMismatch(h_est.len(), obs.width()));
    }
    if h_est.iter().all(|h| h.norm_sqr() == 0.0) {
        return Err(PhyError::Undecodable(obs.slot));
    }
    let mut bits = Vec::with_capacity(obs.width() * modulation.bits_per_symbol());
    let mut symbols = Vec::with_capacity(obs.width());
    let mut err = 0.0;
    for (y, h) in obs.y.iter().zip(h_est) {
        let eq = if h.norm_sqr() > 0.0 { y / h } else { Complex64::new(0.0, 0.0) };
        let s = modulation.demap(eq, &mut bits);
        if amplitude > 0.0 {
            err += (eq / amplitude - s).norm_sqr();
        }
        symbols.push(s);
    }
    let evm = if amplitude > 0.0 { (err / obs.width() as f64).sqrt() } else { f64::INFINITY };
    Ok(Demodulated { symbols, bits, evm })
}

/// How the receiver accounts for what a cancellation leaves behind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualModel {
    /// True estimation error `|H_est - H|^2` (simulation only).
    Genie,
    /// Fixed per-subcarrier error power, see [`estimation_error_proxy`].
    Proxy(f64),
}

/// Per-subcarrier channel error power implied by the recovery guarantee
/// `||h_hat - h|| <= c1 * eps / sqrt(n * alpha)` for columns of norm
/// `sqrt(n * alpha)`, shared evenly among the `k2` active users.
pub fn estimation_error_proxy(c1: f64, eps: f64, n: usize, alpha: f64, k2: usize) -> f64 {
    if alpha <= 0.0 || k2 == 0 {
        return f64::INFINITY;
    }
    c1 * c1 * eps * eps / (n as f64 * alpha * k2 as f64)
}

/// Per-subcarrier residue power `a^2 * |d_f|^2` left by cancelling a user.
pub fn residue_power(model: ResidualModel, h_est: &[Complex64], h_true: Option<&[Complex64]>, amplitude: f64) -> Vec<f64> {
    let a2 = amplitude * amplitude;
    match (model, h_true) {
        (ResidualModel::Genie, Some(h)) => h_est.iter().zip(h).map(|(e, t)| a2 * (e - t).norm_sqr()).collect(),
        (ResidualModel::Genie, None) => alloc::vec![0.0; h_est.len()],
        (ResidualModel::Proxy(p), _) => alloc::vec![a2 * p; h_est.len()],
    }
}

/// Subtracts the re-synthesized replica `H_est_f * a * s_f` of `user` and
/// books `residue` (per subcarrier) into the slot's residual power.
pub fn cancel_replica(
    obs: &mut SlotObservation,
    user: usize,
    h_est: &[Complex64],
    symbols: &[Complex64],
    amplitude: f64,
    residue: &[f64],
) -> Result<(), PhyError> {
    let pos = obs.users.iter().position(|&u| u == user).ok_or(PhyError::NotInSlot { user, slot: obs.slot })?;
    if h_est.len() != obs.width() || symbols.len() != obs.width() || residue.len() != obs.width() {
        return Err(PhyError::LengthMismatch(h_est.len(), obs.width()));
    }
    for f in 0..obs.width() {
        obs.y[f] -= h_est[f] * symbols[f] * amplitude;
        obs.residual_power[f] += residue[f];
    }
    obs.users.remove(pos);
    Ok(())
}

/// A co-channel user that has not been cancelled: its estimated response on
/// the slot and its per-subcarrier amplitude.
#[derive(Debug, Clone, Copy)]
pub struct Interferer<'a> {
    pub h_est: &'a [Complex64],
    pub amplitude: f64,
}

/// Slot-average SINR: total desired power over total noise, booked residue
/// and uncancelled co-channel power.
pub fn slot_sinr(
    obs: &SlotObservation,
    h_est: &[Complex64],
    amplitude: f64,
    noise_var: f64,
    colliders: &[Interferer<'_>],
) -> f64 {
    let a2 = amplitude * amplitude;
    let mut signal = 0.0;
    let mut denom = 0.0;
    for f in 0..obs.width() {
        signal += h_est[f].norm_sqr() * a2;
        let mut d = noise_var + obs.residual_power[f];
        for c in colliders {
            d += c.h_est[f].norm_sqr() * c.amplitude * c.amplitude;
        }
        denom += d;
    }
    if denom == 0.0 {
        if signal > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        signal / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaptureMode {
    /// Decodable iff the slot SINR reaches the threshold (linear scale).
    SinrThreshold(f64),
    /// Decodable iff hard decisions reproduce the transmitted bits exactly
    /// (an ideal error-detecting check).
    GenieCrc,
}

impl CaptureMode {
    pub fn sinr_db(gamma_db: f64) -> Self {
        CaptureMode::SinrThreshold(libm::pow(10.0, gamma_db / 10.0))
    }
}

/// Everything the receiver holds about the user it tries to capture.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub h_est: &'a [Complex64],
    pub amplitude: f64,
    /// Transmitted bits on this slot; `None` for a user that is not really
    /// active (a false alarm), which never passes the check.
    pub tx_bits: Option<&'a [u8]>,
}

pub fn capture_decide(
    obs: &SlotObservation,
    cand: &Candidate<'_>,
    mode: CaptureMode,
    modulation: Modulation,
    noise_var: f64,
    colliders: &[Interferer<'_>],
) -> bool {
    match mode {
        CaptureMode::SinrThreshold(gamma) => {
            if !gamma.is_finite() {
                return false;
            }
            slot_sinr(obs, cand.h_est, cand.amplitude, noise_var, colliders) >= gamma
        }
        CaptureMode::GenieCrc => {
            let Some(tx) = cand.tx_bits else { return false };
            match equalize_demod(obs, cand.h_est, modulation, cand.amplitude) {
                Ok(d) => d.bits == tx,
                Err(_) => false,
            }
        }
    }
}

/// Symbol errors between two bit streams grouped `bits_per_symbol` at a time.
pub fn compute_ser(tx_bits: &[u8], rx_bits: &[u8], bits_per_symbol: usize) -> Result<Proportion, PhyError> {
    if tx_bits.len() != rx_bits.len() {
        return Err(PhyError::LengthMismatch(tx_bits.len(), rx_bits.len()));
    }
    let symbols = tx_bits.len() / bits_per_symbol;
    let errors = tx_bits
        .chunks_exact(bits_per_symbol)
        .zip(rx_bits.chunks_exact(bits_per_symbol))
        .filter(|(a, b)| a != b)
        .count();
    Ok(Proportion::new(errors as u64, symbols as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{complex_normal, q_function, unit_phase};
    use crate::seed::StreamSeed;
    use alloc::vec;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    struct Tx {
        bits: Vec<u8>,
        symbols: Vec<Complex64>,
    }

    fn random_tx<R: Rng>(rng: &mut R, w: usize, m: Modulation) -> Tx {
        let k = m.bits_per_symbol();
        let bits: Vec<u8> = (0..w * k).map(|_| rng.gen_range(0..2u8)).collect();
        let symbols = bits.chunks_exact(k).map(|b| m.map(b)).collect();
        Tx { bits, symbols }
    }

    fn receive(h: &[Complex64], tx: &Tx, amp: f64) -> Vec<Complex64> {
        h.iter().zip(&tx.symbols).map(|(h, s)| h * s * amp).collect()
    }

    #[test]
    fn perfect_estimate_noiseless_is_exact() {
        let mut rng = StreamSeed::new(1).rng("phy");
        for m in [Modulation::Bpsk, Modulation::Qpsk] {
            let h: Vec<Complex64> = (0..64).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let tx = random_tx(&mut rng, 64, m);
            let obs = SlotObservation::new(0, receive(&h, &tx, 2.5), vec![0]);
            let d = equalize_demod(&obs, &h, m, 2.5).unwrap();
            assert_eq!(d.bits, tx.bits);
            assert!(d.evm < 1e-12);
        }
    }

    #[test]
    fn all_zero_estimate_is_undecodable() {
        let obs = SlotObservation::new(3, vec![c(1.0, 0.0); 4], vec![0]);
        assert_eq!(equalize_demod(&obs, &[c(0.0, 0.0); 4], Modulation::Bpsk, 1.0), Err(PhyError::Undecodable(3)));
    }

    #[test]
    fn bpsk_awgn_matches_q_function() {
        // Known scalar channel, AWGN: BER = Q(sqrt(2 gamma)).
        let mut rng = StreamSeed::new(2).rng("awgn");
        let (amp, noise_var) = (1.0, 0.25);
        let h = c(0.6, 0.8);
        let gamma = h.norm_sqr() * amp * amp / noise_var;
        let expected = q_function((2.0 * gamma).sqrt());
        let w = 1000;
        let frames = 200;
        let mut errors = 0u64;
        for _ in 0..frames {
            let tx = random_tx(&mut rng, w, Modulation::Bpsk);
            let y: Vec<Complex64> =
                tx.symbols.iter().map(|s| h * s * amp + complex_normal(&mut rng, noise_var)).collect();
            let obs = SlotObservation::new(0, y, vec![0]);
            let d = equalize_demod(&obs, &vec![h; w], Modulation::Bpsk, amp).unwrap();
            errors += d.bits.iter().zip(&tx.bits).filter(|(a, b)| a != b).count() as u64;
        }
        let total = (w * frames) as f64;
        let ber = errors as f64 / total;
        let sigma = (expected * (1.0 - expected) / total).sqrt();
        assert!((ber - expected).abs() <= 3.0 * sigma, "ber {ber} vs {expected} (sigma {sigma})");
    }

    #[test]
    fn sign_flipped_estimate_inverts_bpsk() {
        let mut rng = StreamSeed::new(3).rng("flip");
        let h: Vec<Complex64> = (0..200).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let tx = random_tx(&mut rng, 200, Modulation::Bpsk);
        let obs = SlotObservation::new(0, receive(&h, &tx, 1.0), vec![0]);
        let flipped: Vec<Complex64> = h.iter().map(|v| -v).collect();
        let d = equalize_demod(&obs, &flipped, Modulation::Bpsk, 1.0).unwrap();
        let ber = compute_ser(&tx.bits, &d.bits, 1).unwrap().rate();
        assert!(ber > 0.99);
    }

    #[test]
    fn round_trip_every_constellation_point() {
        let h = c(-0.3, 1.7);
        for m in [Modulation::Bpsk, Modulation::Qpsk] {
            let k = m.bits_per_symbol();
            let bits: Vec<u8> = (0..(1u8 << k)).flat_map(|w| (0..k).map(move |i| (w >> i) & 1)).collect();
            let tx = Tx { symbols: bits.chunks_exact(k).map(|b| m.map(b)).collect(), bits: bits.clone() };
            let obs = SlotObservation::new(0, receive(&vec![h; 1 << k], &tx, 0.7), vec![0]);
            let d = equalize_demod(&obs, &vec![h; 1 << k], m, 0.7).unwrap();
            assert_eq!(d.bits, bits);
            assert_eq!(d.symbols, tx.symbols);
        }
    }

    #[test]
    fn perfect_cancellation_leaves_other_user() {
        let mut rng = StreamSeed::new(4).rng("cancel");
        let w = 32;
        let h1: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let h2: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let t1 = random_tx(&mut rng, w, Modulation::Qpsk);
        let t2 = random_tx(&mut rng, w, Modulation::Qpsk);
        let y2 = receive(&h2, &t2, 1.3);
        let y: Vec<Complex64> = receive(&h1, &t1, 1.3).iter().zip(&y2).map(|(a, b)| a + b).collect();
        let mut obs = SlotObservation::new(0, y, vec![10, 20]);
        cancel_replica(&mut obs, 10, &h1, &t1.symbols, 1.3, &vec![0.0; w]).unwrap();
        let err: f64 = obs.y.iter().zip(&y2).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!(err <= 1e-18 * crate::math::norm_sqr(&y2));
        assert_eq!(obs.users, vec![20]);
        assert_eq!(obs.cancelled(), 1);
        assert_eq!(
            cancel_replica(&mut obs, 10, &h1, &t1.symbols, 1.3, &vec![0.0; w]),
            Err(PhyError::NotInSlot { user: 10, slot: 0 })
        );
    }

    #[test]
    fn imperfect_cancellation_leaves_error_energy() {
        let mut rng = StreamSeed::new(5).rng("residue");
        let w = 48;
        let amp = 1.7;
        let h: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let d: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 0.01)).collect();
        let est: Vec<Complex64> = h.iter().zip(&d).map(|(a, b)| a + b).collect();
        let tx = random_tx(&mut rng, w, Modulation::Bpsk);
        let mut obs = SlotObservation::new(0, receive(&h, &tx, amp), vec![0]);
        let residue = residue_power(ResidualModel::Genie, &est, Some(&h), amp);
        cancel_replica(&mut obs, 0, &est, &tx.symbols, amp, &residue).unwrap();
        let expected: f64 = d.iter().zip(&tx.symbols).map(|(d, s)| d.norm_sqr() * s.norm_sqr() * amp * amp).sum();
        assert!((obs.energy() - expected).abs() <= 1e-12 * expected);
        let booked: f64 = obs.residual_power.iter().sum();
        assert!((booked - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn wrong_symbols_make_cancellation_harmful() {
        let mut rng = StreamSeed::new(6).rng("wrong");
        let w = 64;
        let h: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let tx = random_tx(&mut rng, w, Modulation::Bpsk);
        let mut obs = SlotObservation::new(0, receive(&h, &tx, 1.0), vec![0]);
        let before = obs.energy();
        let flipped: Vec<Complex64> = tx.symbols.iter().map(|s| -s).collect();
        cancel_replica(&mut obs, 0, &h, &flipped, 1.0, &vec![0.0; w]).unwrap();
        assert!(obs.energy() >= before);
    }

    #[test]
    fn sinr_definition_and_collider_monotonicity() {
        let mut rng = StreamSeed::new(7).rng("sinr");
        let w = 16;
        let (alpha, n, noise_var) = (0.2, 2048.0, 0.01);
        let amp = (1.0f64 - alpha).sqrt();
        let h: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 1.0 / n)).map(|v| v * n.sqrt()).collect();
        let obs = SlotObservation::new(0, vec![c(0.0, 0.0); w], vec![0, 1]);
        let s = slot_sinr(&obs, &h, amp, noise_var, &[]);
        let expected: f64 = h.iter().map(|v| (1.0 - alpha) * v.norm_sqr() / noise_var).sum::<f64>() / w as f64;
        assert!((s - expected).abs() < 1e-12 * expected);
        let g: Vec<Complex64> = (0..w).map(|_| unit_phase(&mut rng) * 0.1).collect();
        let s2 = slot_sinr(&obs, &h, amp, noise_var, &[Interferer { h_est: &g, amplitude: amp }]);
        assert!(s2 < s);
    }

    #[test]
    fn sinr_model_matches_measured_energies() {
        // One user plus one cancelled collider with known estimation error.
        let mut rng = StreamSeed::new(8).rng("sinr-mc");
        let (w, amp, noise_var) = (64, 1.2, 0.05);
        let (mut sig, mut meas_den, mut model_den) = (0.0, 0.0, 0.0);
        for _ in 0..100 {
            let hu: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let hj: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let dj: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 0.05)).collect();
            let est_j: Vec<Complex64> = hj.iter().zip(&dj).map(|(a, b)| a + b).collect();
            let tu = random_tx(&mut rng, w, Modulation::Bpsk);
            let tj = random_tx(&mut rng, w, Modulation::Bpsk);
            let y: Vec<Complex64> = (0..w)
                .map(|f| hu[f] * tu.symbols[f] * amp + hj[f] * tj.symbols[f] * amp + complex_normal(&mut rng, noise_var))
                .collect();
            let mut obs = SlotObservation::new(0, y, vec![0, 1]);
            let residue = residue_power(ResidualModel::Genie, &est_j, Some(&hj), amp);
            cancel_replica(&mut obs, 1, &est_j, &tj.symbols, amp, &residue).unwrap();
            let s = slot_sinr(&obs, &hu, amp, noise_var, &[]);
            let signal: f64 = hu.iter().map(|h| h.norm_sqr() * amp * amp).sum();
            sig += signal;
            model_den += signal / s;
            meas_den += (0..w).map(|f| (obs.y[f] - hu[f] * tu.symbols[f] * amp).norm_sqr()).sum::<f64>();
        }
        let model = sig / model_den;
        let measured = sig / meas_den;
        assert!((model / measured - 1.0).abs() < 0.1, "model {model} measured {measured}");
    }

    #[test]
    fn capture_modes() {
        let mut rng = StreamSeed::new(9).rng("capture");
        let w = 32;
        let h: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let tx = random_tx(&mut rng, w, Modulation::Bpsk);
        let obs = SlotObservation::new(0, receive(&h, &tx, 3.0), vec![0]);
        let cand = Candidate { h_est: &h, amplitude: 3.0, tx_bits: Some(&tx.bits) };
        assert!(capture_decide(&obs, &cand, CaptureMode::GenieCrc, Modulation::Bpsk, 1e-4, &[]));
        assert!(capture_decide(&obs, &cand, CaptureMode::sinr_db(6.0), Modulation::Bpsk, 1e-4, &[]));
        assert!(!capture_decide(&obs, &cand, CaptureMode::SinrThreshold(f64::INFINITY), Modulation::Bpsk, 1e-4, &[]));
        let ghost = Candidate { tx_bits: None, ..cand };
        assert!(!capture_decide(&obs, &ghost, CaptureMode::GenieCrc, Modulation::Bpsk, 1e-4, &[]));
    }

    #[test]
    fn strong_user_captured_under_imbalance() {
        // Two users, 20 dB apart; the strong one should clear 6 dB most of
        // the time.
        let mut rng = StreamSeed::new(10).rng("imbalance");
        let w = 44;
        let (strong, weak) = (10.0f64.sqrt(), 1.0f64);
        let noise_var = 0.01;
        let trials = 400;
        let mut sinr_hits = 0;
        let mut crc_hits = 0;
        for _ in 0..trials {
            let h1: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let h2: Vec<Complex64> = (0..w).map(|_| complex_normal(&mut rng, 0.01)).collect();
            let t1 = random_tx(&mut rng, w, Modulation::Bpsk);
            let t2 = random_tx(&mut rng, w, Modulation::Bpsk);
            let y: Vec<Complex64> = (0..w)
                .map(|f| h1[f] * t1.symbols[f] * strong + h2[f] * t2.symbols[f] * weak + complex_normal(&mut rng, noise_var))
                .collect();
            let obs = SlotObservation::new(0, y, vec![0, 1]);
            let cand = Candidate { h_est: &h1, amplitude: strong, tx_bits: Some(&t1.bits) };
            let other = [Interferer { h_est: &h2, amplitude: weak }];
            sinr_hits += capture_decide(&obs, &cand, CaptureMode::sinr_db(6.0), Modulation::Bpsk, noise_var, &other) as u32;
            crc_hits += capture_decide(&obs, &cand, CaptureMode::GenieCrc, Modulation::Bpsk, noise_var, &other) as u32;
        }
        assert!(sinr_hits > trials / 2, "sinr captures {sinr_hits}");
        assert!(crc_hits > trials / 2, "crc captures {crc_hits}");
    }

    #[test]
    fn ser_basics() {
        let a = vec![0u8, 1, 1, 0, 1, 0];
        assert_eq!(compute_ser(&a, &a, 1).unwrap().rate(), 0.0);
        let inv: Vec<u8> = a.iter().map(|b| 1 - b).collect();
        assert_eq!(compute_ser(&a, &inv, 1).unwrap().rate(), 1.0);
        // QPSK: one flipped bit is one symbol error.
        let mut b = a.clone();
        b[0] = 1;
        assert_eq!(compute_ser(&a, &b, 2).unwrap(), Proportion::new(1, 3));
        assert!(compute_ser(&a, &a[..4], 1).is_err());
    }

    #[test]
    fn independent_streams_give_half() {
        let mut rng = StreamSeed::new(11).rng("ser");
        let n = 100_000;
        let a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
        let b: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
        let p = compute_ser(&a, &b, 1).unwrap();
        let (lo, hi) = p.wilson95();
        assert!(lo < 0.5 && 0.5 < hi || (p.rate() - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }
}
