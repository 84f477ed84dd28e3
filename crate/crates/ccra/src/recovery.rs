//! Control-channel receiver: FFT-backed measurement operator, solver
//! dispatch, activity detection and threshold calibration.

use ccra_core::channel::{gen_channel, ChannelRealization};
use ccra_core::math::complex_normal;
use ccra_core::preamble::PreambleSet;
use ccra_core::solver::{
    bpdn_solve, cosamp_solve, detect_activity, hicosamp_solve, ActivityEstimate, BpdnOptions, DirectOperator,
    GreedyOptions, Recovery, SensingOperator, SolveError,
};
use ccra_core::stats::Proportion;
use ccra_core::{CheckedConfig, StreamSeed};
use num_complex::Complex64;
use rand::seq::index;
use rayon::prelude::*;
use thiserror::Error;

use crate::fft::Dft;

/// Matrix-free control-band operator evaluated with length-`n` FFTs.
///
/// Full forward and adjoint actions cost one FFT per user block; the
/// restricted actions used by least-squares refits go through the direct
/// phase table.
#[derive(Debug, Clone)]
pub struct FftOperator {
    dft: Dft,
    band: Vec<usize>,
    s_d: usize,
    values: Vec<Vec<Complex64>>,
    direct: DirectOperator,
}

impl FftOperator {
    pub fn new(preambles: &PreambleSet, s_d: usize, dft: Dft) -> Self {
        assert_eq!(dft.n(), preambles.n());
        let values = (0..preambles.num_users()).map(|u| preambles.band_values(u).to_vec()).collect();
        FftOperator {
            dft,
            band: preambles.band().to_vec(),
            s_d,
            values,
            direct: DirectOperator::new(preambles, s_d),
        }
    }

    pub fn band(&self) -> &[usize] {
        &self.band
    }
}

impl SensingOperator for FftOperator {
    fn rows(&self) -> usize {
        self.band.len()
    }

    fn num_blocks(&self) -> usize {
        self.values.len()
    }

    fn block_len(&self) -> usize {
        self.s_d
    }

    fn forward(&self, x: &[Complex64], out: &mut [Complex64]) {
        let zero = Complex64::new(0.0, 0.0);
        out.iter_mut().for_each(|v| *v = zero);
        let mut buf = vec![zero; self.dft.n()];
        for (u, block) in x.chunks_exact(self.s_d).enumerate() {
            if block.iter().all(|v| *v == zero) {
                continue;
            }
            buf.iter_mut().for_each(|v| *v = zero);
            buf[..self.s_d].copy_from_slice(block);
            self.dft.forward_raw(&mut buf);
            for ((o, &f), p) in out.iter_mut().zip(&self.band).zip(&self.values[u]) {
                *o += p * buf[f];
            }
        }
    }

    fn adjoint(&self, r: &[Complex64], out: &mut [Complex64]) {
        let zero = Complex64::new(0.0, 0.0);
        let mut buf = vec![zero; self.dft.n()];
        for (u, block) in out.chunks_exact_mut(self.s_d).enumerate() {
            buf.iter_mut().for_each(|v| *v = zero);
            for ((&f, p), ri) in self.band.iter().zip(&self.values[u]).zip(r) {
                buf[f] = p.conj() * ri;
            }
            self.dft.inverse_raw(&mut buf);
            block.copy_from_slice(&buf[..self.s_d]);
        }
    }

    fn forward_on(&self, support: &[usize], vals: &[Complex64], out: &mut [Complex64]) {
        self.direct.forward_on(support, vals, out)
    }

    fn adjoint_on(&self, support: &[usize], r: &[Complex64], out: &mut [Complex64]) {
        self.direct.adjoint_on(support, r, out)
    }
}

/// Which evaluation of the operator the receiver uses. Both are exact; the
/// choice is purely about speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorKind {
    Fft,
    Direct,
    /// Direct when its `m * s_d` per-block cost is below `n log2 n`.
    #[default]
    Auto,
}

pub fn build_operator(
    preambles: &PreambleSet,
    s_d: usize,
    dft: &Dft,
    kind: OperatorKind,
) -> Box<dyn SensingOperator + Send + Sync> {
    let n = preambles.n() as f64;
    let use_fft = match kind {
        OperatorKind::Fft => true,
        OperatorKind::Direct => false,
        OperatorKind::Auto => (preambles.band().len() * s_d) as f64 > n * n.log2(),
    };
    if use_fft {
        Box::new(FftOperator::new(preambles, s_d, dft.clone()))
    } else {
        Box::new(DirectOperator::new(preambles, s_d))
    }
}

/// `y_B = P_B W y`.
pub fn measure_control(dft: &Dft, y: &[Complex64], band: &[usize]) -> Vec<Complex64> {
    let f = dft.forward_vec(y);
    band.iter().map(|&i| f[i]).collect()
}

/// Expected noise norm on the band plus 10% slack.
pub fn default_epsilon(noise_var: f64, m: usize) -> f64 {
    (noise_var * m as f64).sqrt() * 1.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    HiCoSaMP,
    CoSaMP,
    Bpdn,
}

impl SolverKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hicosamp" => Some(SolverKind::HiCoSaMP),
            "cosamp" => Some(SolverKind::CoSaMP),
            "bpdn" => Some(SolverKind::Bpdn),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::HiCoSaMP => "hicosamp",
            SolverKind::CoSaMP => "cosamp",
            SolverKind::Bpdn => "bpdn",
        }
    }
}

/// Receiver-side settings of the control channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub solver: SolverKind,
    /// Activity threshold on `||h_hat_u||^2`.
    pub xi: f64,
    /// `None` selects [`default_epsilon`].
    pub epsilon: Option<f64>,
    pub greedy: GreedyOptions,
    pub bpdn: BpdnOptions,
    pub operator: OperatorKind,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            solver: SolverKind::HiCoSaMP,
            xi: 0.05,
            epsilon: None,
            greedy: GreedyOptions::default(),
            bpdn: BpdnOptions::default(),
            operator: OperatorKind::Auto,
        }
    }
}

impl ReceiverConfig {
    pub fn epsilon(&self, cfg: &CheckedConfig) -> f64 {
        self.epsilon.unwrap_or_else(|| default_epsilon(cfg.config().noise_var, cfg.m()))
    }
}

/// Runs the configured solver on `y_B`. The greedy solvers assume `k2`
/// active blocks of `k1` taps and stop once the residual reaches `epsilon`.
pub fn recover(
    op: &(dyn SensingOperator + Send + Sync),
    y_b: &[Complex64],
    cfg: &CheckedConfig,
    rx: &ReceiverConfig,
) -> Result<Recovery, SolveError> {
    let c = cfg.config();
    let eps = rx.epsilon(cfg);
    let greedy = GreedyOptions { target_residual: eps, ..rx.greedy.clone() };
    match rx.solver {
        SolverKind::HiCoSaMP => hicosamp_solve(op, y_b, c.k2.max(1), c.k1, &greedy),
        SolverKind::CoSaMP => cosamp_solve(op, y_b, c.k2.max(1) * c.k1, &greedy),
        SolverKind::Bpdn => bpdn_solve(op, y_b, eps, &rx.bpdn),
    }
}

/// Everything fixed across the trials of one configuration.
pub struct Receiver {
    pub cfg: CheckedConfig,
    pub dft: Dft,
    pub preambles: PreambleSet,
    pub op: Box<dyn SensingOperator + Send + Sync>,
    pub rx: ReceiverConfig,
}

impl Receiver {
    pub fn new(cfg: CheckedConfig, rx: ReceiverConfig) -> Self {
        let dft = Dft::new(cfg.n());
        let preambles = PreambleSet::generate(&cfg, cfg.seed());
        let op = build_operator(&preambles, cfg.config().s_d, &dft, rx.operator);
        Receiver { cfg, dft, preambles, op, rx }
    }

    pub fn recover(&self, y_b: &[Complex64]) -> Result<Recovery, SolveError> {
        recover(self.op.as_ref(), y_b, &self.cfg, &self.rx)
    }

    pub fn detect(&self, recovery: &Recovery) -> ActivityEstimate {
        detect_activity(recovery.estimate.clone(), self.cfg.config().s_d, self.rx.xi)
    }

    /// Control-band observation for the given active preambles, synthesized
    /// directly on the band: `y_f = sum_u H_{u,f} p_hat_{u,f} + e_f`. Data
    /// lives on the complement of the band and does not enter.
    pub fn control_observation(
        &self,
        preambles: &[usize],
        channels: &[ChannelRealization],
        seed: StreamSeed,
    ) -> Vec<Complex64> {
        let n = self.cfg.n();
        let band = self.cfg.band();
        let mut y = vec![Complex64::new(0.0, 0.0); band.len()];
        for (&u, h) in preambles.iter().zip(channels) {
            for ((o, &f), p) in y.iter_mut().zip(band).zip(self.preambles.band_values(u)) {
                *o += h.response_at(f, n) * p;
            }
        }
        let var = self.cfg.config().noise_var;
        if var > 0.0 {
            let mut rng = seed.rng("control-noise");
            for v in y.iter_mut() {
                *v += complex_normal(&mut rng, var);
            }
        }
        y
    }

    /// One detection trial with `k2` distinct active preambles: block
    /// energies of the active and of the inactive preambles.
    pub fn detection_trial(&self, seed: StreamSeed) -> Result<DetectionSample, SolveError> {
        let c = self.cfg.config();
        let mut rng = seed.rng("active-set");
        let mut active = index::sample(&mut rng, c.num_users, c.k2).into_vec();
        active.sort_unstable();
        let channels: Vec<ChannelRealization> = active
            .iter()
            .enumerate()
            .map(|(i, &u)| gen_channel(u, c.k1, c.s_d, &mut seed.derive(i as u64).rng("channel")))
            .collect();
        let y = self.control_observation(&active, &channels, seed);
        let rec = self.recover(&y)?;
        let est = detect_activity(rec.estimate, c.s_d, self.rx.xi);
        let mut is_active = vec![false; c.num_users];
        active.iter().for_each(|&u| is_active[u] = true);
        let (mut act, mut inact) = (Vec::new(), Vec::new());
        for (u, &e) in est.user_norms.iter().enumerate() {
            if is_active[u] {
                act.push(e)
            } else {
                inact.push(e)
            }
        }
        Ok(DetectionSample { active: act, inactive: inact, iterations: rec.report.iterations })
    }

    pub fn detection_trials(&self, trials: usize, seed: StreamSeed) -> Result<Vec<DetectionSample>, SolveError> {
        (0..trials).into_par_iter().map(|t| self.detection_trial(seed.derive(t as u64))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSample {
    pub active: Vec<f64>,
    pub inactive: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("target false-alarm rate {target} is below the resolution 1/{samples} of the trial budget")]
    Resolution { target: f64, samples: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub xi: f64,
    pub target_pfa: f64,
    /// Inactive-user block energies the threshold was drawn from.
    pub samples: usize,
}

/// Smallest `xi` such that the empirical fraction of inactive-user block
/// energies strictly above it is at most `target_pfa`.
pub fn threshold_from_samples(mut inactive: Vec<f64>, target_pfa: f64) -> Result<f64, CalibrationError> {
    let n = inactive.len();
    if n == 0 || target_pfa * (n as f64) < 1.0 {
        return Err(CalibrationError::Resolution { target: target_pfa, samples: n });
    }
    inactive.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let allowed = (target_pfa * n as f64).floor() as usize;
    Ok(inactive[allowed.min(n - 1)])
}

pub fn calibrate_threshold(
    receiver: &Receiver,
    target_pfa: f64,
    trials: usize,
    seed: StreamSeed,
) -> Result<Calibration, CalibrationError> {
    let c = receiver.cfg.config();
    let samples = trials * (c.num_users - c.k2);
    if samples == 0 || target_pfa * (samples as f64) < 1.0 {
        return Err(CalibrationError::Resolution { target: target_pfa, samples });
    }
    let runs = receiver.detection_trials(trials, seed.labeled("calibrate"))?;
    let inactive: Vec<f64> = runs.into_iter().flat_map(|r| r.inactive).collect();
    let xi = threshold_from_samples(inactive, target_pfa)?;
    Ok(Calibration { xi, target_pfa, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRates {
    pub missed: Proportion,
    pub false_alarm: Proportion,
    pub mean_iterations: f64,
}

pub fn rates_from_samples(samples: &[DetectionSample], xi: f64) -> DetectionRates {
    let mut missed = Proportion::new(0, 0);
    let mut fa = Proportion::new(0, 0);
    let mut iters = 0usize;
    for s in samples {
        let m = s.active.iter().filter(|&&e| e <= xi).count();
        let f = s.inactive.iter().filter(|&&e| e > xi).count();
        missed = missed.merge(Proportion::new(m as u64, s.active.len() as u64));
        fa = fa.merge(Proportion::new(f as u64, s.inactive.len() as u64));
        iters += s.iterations;
    }
    let mean_iterations = if samples.is_empty() { 0.0 } else { iters as f64 / samples.len() as f64 };
    DetectionRates { missed, false_alarm: fa, mean_iterations }
}

pub fn estimate_pmd_pfa(receiver: &Receiver, xi: f64, trials: usize, seed: StreamSeed) -> Result<DetectionRates, SolveError> {
    let runs = receiver.detection_trials(trials, seed.labeled("rates"))?;
    Ok(rates_from_samples(&runs, xi))
}
