//! System configuration, validation and the constellation mapper.
//!
//! Power conventions used throughout the crate:
//!
//! * Every active user transmits unit average power per sample, split into a
//!   preamble share `alpha` and a data share `1 - alpha`, i.e.
//!   `||p_u||^2 = n * alpha` and `E||x_u||^2 = n * (1 - alpha)`.
//! * Channels have unit expected energy, `E||h_u||^2 = 1`, so the overall
//!   SNR is `1 / noise_var`.
//! * The Fourier map is unitary; the per-subcarrier channel response is
//!   `H_f = sum_l h_l exp(-i 2 pi f l / n)`, which has `E|H_f|^2 = 1`.

use alloc::vec::Vec;
use core::ops::Range;

use num_complex::Complex64;
use rand::seq::index;
use thiserror::Error;

use crate::seed::StreamSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }

    /// Unit-energy symbol for `bits` (length `bits_per_symbol`). Bit 0 maps to
    /// the positive half-axis.
    pub fn map(self, bits: &[u8]) -> Complex64 {
        let s = |b: u8| if b == 0 { 1.0 } else { -1.0 };
        match self {
            Modulation::Bpsk => Complex64::new(s(bits[0]), 0.0),
            Modulation::Qpsk => {
                Complex64::new(s(bits[0]), s(bits[1])) * core::f64::consts::FRAC_1_SQRT_2
            }
        }
    }

    /// Nearest constellation point (hard decision); appends the bits to `out`
    /// and returns the unit-energy symbol.
    pub fn demap(self, z: Complex64, out: &mut Vec<u8>) -> Complex64 {
        let b = |v: f64| u8::from(v < 0.0);
        match self {
            Modulation::Bpsk => {
                out.push(b(z.re));
            }
            Modulation::Qpsk => {
                out.push(b(z.re));
                out.push(b(z.im));
            }
        }
        let n = out.len();
        self.map(&out[n - self.bits_per_symbol()..])
    }
}

/// How the control band `B` is specified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlBand {
    /// Explicit subcarrier indices.
    Explicit(Vec<usize>),
    /// `m` contiguous subcarriers centred in `[0, n)`.
    Centered(usize),
    /// `m` subcarriers drawn uniformly without replacement from `[0, n)`,
    /// keyed by the master seed.
    Random(usize),
}

impl ControlBand {
    pub fn len(&self) -> usize {
        match self {
            ControlBand::Explicit(v) => v.len(),
            ControlBand::Centered(m) | ControlBand::Random(m) => *m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Every scalar of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of OFDM subcarriers (FFT size).
    pub n: usize,
    pub control_band: ControlBand,
    /// Cyclic-prefix length, an upper bound on the channel support.
    pub s_cp: usize,
    /// Delay window searched by the receiver (dictionary depth per user).
    pub s_d: usize,
    /// Taps per user channel.
    pub k1: usize,
    /// Preamble set size `U`.
    pub num_users: usize,
    /// Active users per frame.
    pub k2: usize,
    pub alpha: f64,
    /// Per complex dimension AWGN variance.
    pub noise_var: f64,
    /// Number of frequency slots `B` partitioning the data band.
    pub num_data_slots: usize,
    pub modulation: Modulation,
    pub master_seed: u64,
    /// Node-oriented replica degree distribution `Lambda`, as `(degree, prob)`.
    pub degree_dist: Vec<(usize, f64)>,
}

impl SystemConfig {
    /// Scaled-down configuration used by the tests and as the CLI default.
    pub fn scaled() -> Self {
        SystemConfig {
            n: 2048,
            control_band: ControlBand::Random(280),
            s_cp: 160,
            s_d: 25,
            k1: 4,
            num_users: 50,
            k2: 5,
            alpha: 0.21,
            noise_var: 0.01,
            num_data_slots: 40,
            modulation: Modulation::Bpsk,
            master_seed: 1,
            degree_dist: alloc::vec![(3, 1.0)],
        }
    }

    /// LTE-A sized configuration: 839 PRACH-like control subcarriers out of
    /// 24576, 300-sample delay window, 6 paths, 10 of 100 users active.
    pub fn full_scale() -> Self {
        SystemConfig {
            n: 24576,
            control_band: ControlBand::Centered(839),
            s_cp: 3000,
            s_d: 300,
            k1: 6,
            num_users: 100,
            k2: 10,
            alpha: 0.21,
            noise_var: 0.01,
            num_data_slots: 100,
            modulation: Modulation::Bpsk,
            master_seed: 1,
            degree_dist: alloc::vec![(3, 1.0)],
        }
    }

    pub fn snr_db(&self) -> f64 {
        -10.0 * libm::log10(self.noise_var)
    }

    /// Sets `noise_var` from an overall SNR in dB (unit transmit power and
    /// unit channel energy).
    pub fn set_snr_db(&mut self, snr_db: f64) {
        self.noise_var = libm::pow(10.0, -snr_db / 10.0);
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("field `{0}` must be positive")]
    NotPositive(&'static str),
    #[error("control_band: {m} subcarriers do not fit strictly inside n = {n}")]
    BandTooLarge { m: usize, n: usize },
    #[error("control_band: index {0} out of range")]
    BandIndexOutOfRange(usize),
    #[error("control_band: duplicate index {0}")]
    DuplicateBandIndex(usize),
    #[error("k1 = {k1} exceeds s_d = {s_d}")]
    TapsExceedWindow { k1: usize, s_d: usize },
    #[error("s_d = {s_d} exceeds s_cp = {s_cp}")]
    WindowExceedsPrefix { s_d: usize, s_cp: usize },
    #[error("s_cp = {s_cp} must be smaller than n = {n}")]
    PrefixTooLong { s_cp: usize, n: usize },
    #[error("k2 = {k2} exceeds U = {u}")]
    TooManyActive { k2: usize, u: usize },
    #[error("alpha = {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("noise_var = {0} must be finite and nonnegative")]
    NoiseVar(f64),
    #[error("num_data_slots = {slots} leaves no subcarrier per slot ({free} data subcarriers)")]
    SlotsTooNarrow { slots: usize, free: usize },
    #[error("degree_dist: {0}")]
    DegreeDist(&'static str),
}

/// A configuration whose invariants have been checked, with derived
/// quantities cached.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedConfig {
    cfg: SystemConfig,
    band: Vec<usize>,
    data: Vec<usize>,
    slot_width: usize,
}

pub fn validate(cfg: SystemConfig) -> Result<CheckedConfig, ConfigError> {
    CheckedConfig::new(cfg)
}

impl CheckedConfig {
    pub fn new(cfg: SystemConfig) -> Result<Self, ConfigError> {
        for (name, v) in [
            ("n", cfg.n),
            ("s_cp", cfg.s_cp),
            ("s_d", cfg.s_d),
            ("k1", cfg.k1),
            ("U", cfg.num_users),
            ("num_data_slots", cfg.num_data_slots),
        ] {
            if v == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        let n = cfg.n;
        let m = cfg.control_band.len();
        if m == 0 {
            return Err(ConfigError::NotPositive("control_band"));
        }
        if m >= n {
            return Err(ConfigError::BandTooLarge { m, n });
        }
        let band = resolve_band(&cfg.control_band, n, cfg.master_seed)?;
        if cfg.k1 > cfg.s_d {
            return Err(ConfigError::TapsExceedWindow { k1: cfg.k1, s_d: cfg.s_d });
        }
        if cfg.s_d > cfg.s_cp {
            return Err(ConfigError::WindowExceedsPrefix { s_d: cfg.s_d, s_cp: cfg.s_cp });
        }
        if cfg.s_cp >= n {
            return Err(ConfigError::PrefixTooLong { s_cp: cfg.s_cp, n });
        }
        if cfg.k2 > cfg.num_users {
            return Err(ConfigError::TooManyActive { k2: cfg.k2, u: cfg.num_users });
        }
        if !(0.0..=1.0).contains(&cfg.alpha) {
            return Err(ConfigError::AlphaOutOfRange(cfg.alpha));
        }
        if !(cfg.noise_var.is_finite() && cfg.noise_var >= 0.0) {
            return Err(ConfigError::NoiseVar(cfg.noise_var));
        }
        check_degree_dist(&cfg.degree_dist, cfg.num_data_slots)?;

        let mut in_band = alloc::vec![false; n];
        for &f in &band {
            in_band[f] = true;
        }
        let data: Vec<usize> = (0..n).filter(|&f| !in_band[f]).collect();
        let slot_width = data.len() / cfg.num_data_slots;
        if slot_width == 0 {
            return Err(ConfigError::SlotsTooNarrow { slots: cfg.num_data_slots, free: data.len() });
        }
        Ok(CheckedConfig { cfg, band, data, slot_width })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn into_config(self) -> SystemConfig {
        self.cfg
    }

    pub fn n(&self) -> usize {
        self.cfg.n
    }

    pub fn m(&self) -> usize {
        self.band.len()
    }

    /// Sorted control-band subcarriers.
    pub fn band(&self) -> &[usize] {
        &self.band
    }

    /// Sorted data-band subcarriers (the complement of the control band).
    pub fn data_subcarriers(&self) -> &[usize] {
        &self.data
    }

    pub fn slot_width(&self) -> usize {
        self.slot_width
    }

    pub fn num_slots(&self) -> usize {
        self.cfg.num_data_slots
    }

    /// Positions (into [`Self::data_subcarriers`]) occupied by slot `b`.
    pub fn slot_range(&self, b: usize) -> Range<usize> {
        b * self.slot_width..(b + 1) * self.slot_width
    }

    pub fn slot_subcarriers(&self, b: usize) -> &[usize] {
        &self.data[self.slot_range(b)]
    }

    pub fn seed(&self) -> StreamSeed {
        StreamSeed::new(self.cfg.master_seed)
    }

    /// Mean degree `Lambda'(1)`.
    pub fn mean_degree(&self) -> f64 {
        self.cfg.degree_dist.iter().map(|&(d, p)| d as f64 * p).sum()
    }
}

fn resolve_band(spec: &ControlBand, n: usize, master_seed: u64) -> Result<Vec<usize>, ConfigError> {
    let mut band = match spec {
        ControlBand::Explicit(v) => v.clone(),
        ControlBand::Centered(m) => {
            let start = (n - m) / 2;
            (start..start + m).collect()
        }
        ControlBand::Random(m) => {
            let mut rng = StreamSeed::new(master_seed).rng("control-band");
            index::sample(&mut rng, n, *m).into_vec()
        }
    };
    band.sort_unstable();
    for w in band.windows(2) {
        if w[0] == w[1] {
            return Err(ConfigError::DuplicateBandIndex(w[0]));
        }
    }
    if let Some(&last) = band.last() {
        if last >= n {
            return Err(ConfigError::BandIndexOutOfRange(last));
        }
    }
    Ok(band)
}

pub(crate) fn check_degree_dist(dist: &[(usize, f64)], max_degree: usize) -> Result<(), ConfigError> {
    if dist.is_empty() {
        return Err(ConfigError::DegreeDist("empty"));
    }
    let mut total = 0.0;
    for &(d, p) in dist {
        if d == 0 {
            return Err(ConfigError::DegreeDist("degree 0"));
        }
        if d > max_degree {
            return Err(ConfigError::DegreeDist("degree exceeds num_data_slots"));
        }
        if !(p.is_finite() && p >= 0.0) {
            return Err(ConfigError::DegreeDist("negative or non-finite probability"));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(ConfigError::DegreeDist("probabilities do not sum to 1"));
    }
    Ok(())
}
