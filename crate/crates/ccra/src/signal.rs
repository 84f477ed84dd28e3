//! Waveform synthesis: circulant channels, data payloads and the received
//! OFDM symbol `y = sum_u circ([h_u, 0]) (p_u + x_u) + e`.

use std::io::{self, Read, Write};

use ccra_core::channel::ChannelRealization;
use ccra_core::math::complex_normal;
use ccra_core::preamble::{PatternMap, PreambleSet};
use ccra_core::{CheckedConfig, Modulation, StreamSeed};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::fft::Dft;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("tap delay {delay} outside the prefix [0, {limit})")]
    DelayOutOfRange { delay: usize, limit: usize },
    #[error("expected length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("{0} channels for {1} payloads")]
    Mismatch(usize, usize),
}

fn check_delays(h: &ChannelRealization, limit: usize) -> Result<(), SignalError> {
    match h.taps.iter().find(|t| t.delay >= limit) {
        Some(t) => Err(SignalError::DelayOutOfRange { delay: t.delay, limit }),
        None => Ok(()),
    }
}

/// Full frequency response `H_f` for `f = 0..n`.
pub fn freq_response(dft: &Dft, h: &ChannelRealization) -> Vec<Complex64> {
    let mut buf = h.dense(dft.n());
    dft.forward_raw(&mut buf);
    buf
}

/// Circular convolution of the zero-padded tap vector with `v`, evaluated
/// as `sqrt(n) W^* (h_hat . v_hat)`.
pub fn circ_apply(dft: &Dft, h: &ChannelRealization, v: &[Complex64], s_cp: usize) -> Result<Vec<Complex64>, SignalError> {
    if v.len() != dft.n() {
        return Err(SignalError::Length { expected: dft.n(), got: v.len() });
    }
    check_delays(h, s_cp)?;
    let resp = freq_response(dft, h);
    let mut x = dft.forward_vec(v);
    for (a, b) in x.iter_mut().zip(&resp) {
        *a *= b;
    }
    dft.inverse(&mut x);
    Ok(x)
}

/// What one active user sends: identical modulated symbols in every slot of
/// its pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPayload {
    pub preamble: u64,
    pub slots: Vec<usize>,
    /// Bits of one replica.
    pub bits: Vec<u8>,
    /// Unit-energy symbols of one replica, one per slot subcarrier.
    pub symbols: Vec<Complex64>,
    /// Per-subcarrier amplitude: the data energy `n (1 - alpha)` spread
    /// evenly over all occupied subcarriers.
    pub amplitude: f64,
}

impl UserPayload {
    /// `x_hat_u` over all `n` subcarriers.
    pub fn freq_vector(&self, cfg: &CheckedConfig) -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); cfg.n()];
        for &b in &self.slots {
            for (&f, s) in cfg.slot_subcarriers(b).iter().zip(&self.symbols) {
                x[f] = s * self.amplitude;
            }
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TxPayload {
    pub users: Vec<UserPayload>,
}

pub fn data_amplitude(cfg: &CheckedConfig, degree: usize) -> f64 {
    if degree == 0 {
        return 0.0;
    }
    let c = cfg.config();
    (c.n as f64 * (1.0 - c.alpha) / (degree * cfg.slot_width()) as f64).sqrt()
}

/// Random bits for each active user (one entry per preamble choice).
pub fn gen_payload(cfg: &CheckedConfig, patterns: &PatternMap, choices: &[u64], seed: StreamSeed) -> TxPayload {
    let modulation: Modulation = cfg.config().modulation;
    let k = modulation.bits_per_symbol();
    let w = cfg.slot_width();
    let users = choices
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut rng = seed.derive(i as u64).rng("payload");
            let bits: Vec<u8> = (0..w * k).map(|_| rng.gen_range(0..2u8)).collect();
            let symbols = bits.chunks_exact(k).map(|b| modulation.map(b)).collect();
            let slots = patterns.pattern(p).slots;
            let amplitude = data_amplitude(cfg, slots.len());
            UserPayload { preamble: p, slots, bits, symbols, amplitude }
        })
        .collect();
    TxPayload { users }
}

/// Received time-domain symbol. `channels[i]` belongs to `payload.users[i]`;
/// noise comes from `seed`.
pub fn synthesize_rx(
    cfg: &CheckedConfig,
    dft: &Dft,
    preambles: &PreambleSet,
    channels: &[ChannelRealization],
    payload: &TxPayload,
    seed: StreamSeed,
) -> Result<Vec<Complex64>, SignalError> {
    if channels.len() != payload.users.len() {
        return Err(SignalError::Mismatch(channels.len(), payload.users.len()));
    }
    let n = cfg.n();
    let s_cp = cfg.config().s_cp;
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (h, user) in channels.iter().zip(&payload.users) {
        let mut v = preambles.freq_vector(user.preamble as usize);
        for (a, b) in v.iter_mut().zip(user.freq_vector(cfg)) {
            *a += b;
        }
        dft.inverse(&mut v);
        let out = circ_apply(dft, h, &v, s_cp)?;
        for (a, b) in y.iter_mut().zip(out) {
            *a += b;
        }
    }
    add_noise(&mut y, cfg.config().noise_var, seed);
    Ok(y)
}

pub fn add_noise(y: &mut [Complex64], noise_var: f64, seed: StreamSeed) {
    if noise_var > 0.0 {
        let mut rng = seed.rng("noise");
        for v in y.iter_mut() {
            *v += complex_normal(&mut rng, noise_var);
        }
    }
}

/// Magic bytes of the binary dump format.
pub const DUMP_MAGIC: [u8; 8] = *b"CCRAdump";

/// Writes a 16-byte header (magic, `n` as little-endian u64) followed by
/// interleaved little-endian `f32` real/imaginary pairs.
pub fn write_dump<W: Write>(mut w: W, x: &[Complex64]) -> io::Result<()> {
    w.write_all(&DUMP_MAGIC)?;
    w.write_all(&(x.len() as u64).to_le_bytes())?;
    for v in x {
        w.write_all(&(v.re as f32).to_le_bytes())?;
        w.write_all(&(v.im as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> io::Result<Vec<Complex64>> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if head[..8] != DUMP_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad dump magic"));
    }
    let n = u64::from_le_bytes(head[8..].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| {
            Complex64::new(
                f32::from_le_bytes(c[..4].try_into().unwrap()) as f64,
                f32::from_le_bytes(c[4..].try_into().unwrap()) as f64,
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccra_core::channel::{gen_channel, Tap};
    use ccra_core::math::norm_sqr;
    use ccra_core::SystemConfig;

    fn small_cfg() -> CheckedConfig {
        let mut c = SystemConfig::scaled();
        c.n = 256;
        c.control_band = ccra_core::model::ControlBand::Centered(40);
        c.s_cp = 32;
        c.s_d = 16;
        c.num_data_slots = 8;
        CheckedConfig::new(c).unwrap()
    }

    #[test]
    fn identity_and_shift() {
        let dft = Dft::new(16);
        let mut rng = StreamSeed::new(1).rng("v");
        let v: Vec<Complex64> = (0..16).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let out = circ_apply(&dft, &ChannelRealization::identity(0), &v, 4).unwrap();
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b).norm() < 1e-12);
        }
        let shift =
            ChannelRealization { user_id: 0, taps: vec![Tap { delay: 1, gain: Complex64::new(1.0, 0.0) }] };
        let out = circ_apply(&dft, &shift, &v, 4).unwrap();
        for t in 0..16 {
            assert!((out[(t + 1) % 16] - v[t]).norm() < 1e-12);
        }
        let far = ChannelRealization { user_id: 0, taps: vec![Tap { delay: 4, gain: Complex64::new(1.0, 0.0) }] };
        assert!(circ_apply(&dft, &far, &v, 4).is_err());
    }

    #[test]
    fn no_users_no_noise_is_zero() {
        let mut c = small_cfg().into_config();
        c.noise_var = 0.0;
        let cfg = CheckedConfig::new(c).unwrap();
        let dft = Dft::new(cfg.n());
        let pre = PreambleSet::generate(&cfg, cfg.seed());
        let y = synthesize_rx(&cfg, &dft, &pre, &[], &TxPayload::default(), StreamSeed::new(3)).unwrap();
        assert!(y.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn identity_channel_passes_preamble_plus_data() {
        let mut c = small_cfg().into_config();
        c.noise_var = 0.0;
        let cfg = CheckedConfig::new(c).unwrap();
        let dft = Dft::new(cfg.n());
        let pre = PreambleSet::generate(&cfg, cfg.seed());
        let payload = gen_payload(&cfg, pre.patterns(), &[7], StreamSeed::new(4));
        let y = synthesize_rx(&cfg, &dft, &pre, &[ChannelRealization::identity(0)], &payload, StreamSeed::new(5))
            .unwrap();
        let p = dft.inverse_vec(&pre.freq_vector(7));
        let x = dft.inverse_vec(&payload.users[0].freq_vector(&cfg));
        for t in 0..cfg.n() {
            assert!((y[t] - p[t] - x[t]).norm() < 1e-12);
        }
        // Data energy n (1 - alpha), preamble energy n alpha.
        let n = cfg.n() as f64;
        let alpha = cfg.config().alpha;
        assert!((norm_sqr(&x) - n * (1.0 - alpha)).abs() < 1e-9 * n);
        assert!((norm_sqr(&p) - n * alpha).abs() < 1e-9 * n);
    }

    #[test]
    fn linearity_and_parseval() {
        let mut c = small_cfg().into_config();
        c.noise_var = 0.0;
        let cfg = CheckedConfig::new(c).unwrap();
        let dft = Dft::new(cfg.n());
        let pre = PreambleSet::generate(&cfg, cfg.seed());
        let mut rng = StreamSeed::new(8).rng("ch");
        let chans: Vec<ChannelRealization> = (0..3).map(|u| gen_channel(u, 4, 16, &mut rng)).collect();
        let payload = gen_payload(&cfg, pre.patterns(), &[1, 2, 3], StreamSeed::new(9));
        let seed = StreamSeed::new(10);
        let all = synthesize_rx(&cfg, &dft, &pre, &chans, &payload, seed).unwrap();
        let mut sum = vec![Complex64::new(0.0, 0.0); cfg.n()];
        for i in 0..3 {
            let one = TxPayload { users: vec![payload.users[i].clone()] };
            let y = synthesize_rx(&cfg, &dft, &pre, &chans[i..i + 1], &one, seed).unwrap();
            for (a, b) in sum.iter_mut().zip(y) {
                *a += b;
            }
        }
        for (a, b) in all.iter().zip(&sum) {
            assert!((a - b).norm() < 1e-10);
        }
        let f = dft.forward_vec(&all);
        assert!((norm_sqr(&f) - norm_sqr(&all)).abs() <= 1e-10 * norm_sqr(&all));
    }

    #[test]
    fn dump_round_trip() {
        let x = vec![Complex64::new(1.5, -2.0), Complex64::new(0.25, 8.0)];
        let mut buf = Vec::new();
        write_dump(&mut buf, &x).unwrap();
        assert_eq!(buf.len(), 16 + 16);
        assert_eq!(&buf[..8], b"CCRAdump");
        assert_eq!(read_dump(&buf[..]).unwrap(), x);
        buf[0] = b'X';
        assert!(read_dump(&buf[..]).is_err());
    }
}
