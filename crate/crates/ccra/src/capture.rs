//! Capture probabilities measured at the slot level, for density evolution
//! fed by the physical layer.

use ccra_core::analysis::{AnalysisError, CaptureTable};
use ccra_core::channel::gen_channel;
use ccra_core::math::complex_normal;
use ccra_core::phy::{cancel_replica, capture_decide, residue_power, Candidate, CaptureMode, Interferer, ResidualModel, SlotObservation};
use ccra_core::solver::SolveError;
use ccra_core::{CheckedConfig, StreamSeed};
use num_complex::Complex64;
use rand::Rng;
use rand::seq::index;
use rayon::prelude::*;

use crate::recovery::Receiver;
use crate::signal::data_amplitude;

/// Mean `|H_est - H|^2` per data subcarrier over detected active users,
/// and how many users contributed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationError {
    pub mse: f64,
    pub users: usize,
}

pub fn estimation_mse(receiver: &Receiver, trials: usize, seed: StreamSeed) -> Result<EstimationError, SolveError> {
    let cfg = &receiver.cfg;
    let c = cfg.config();
    let n = cfg.n();
    // A thinned set of data subcarriers keeps this cheap.
    let step = (cfg.data_subcarriers().len() / 64).max(1);
    let probe: Vec<usize> = cfg.data_subcarriers().iter().step_by(step).copied().collect();
    let parts: Vec<(f64, usize)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = seed.derive(t as u64);
            let mut rng = seed.rng("active-set");
            let mut active = index::sample(&mut rng, c.num_users, c.k2).into_vec();
            active.sort_unstable();
            let channels: Vec<_> = active
                .iter()
                .enumerate()
                .map(|(i, &u)| gen_channel(u, c.k1, c.s_d, &mut seed.derive(i as u64).rng("channel")))
                .collect();
            let y = receiver.control_observation(&active, &channels, seed);
            let est = receiver.detect(&receiver.recover(&y)?);
            let (mut sum, mut users) = (0.0, 0);
            for (&u, h) in active.iter().zip(&channels) {
                if !est.is_detected(u) {
                    continue;
                }
                let block = est.block(u);
                for &f in &probe {
                    let h_est: Complex64 = block
                        .iter()
                        .enumerate()
                        .map(|(l, v)| v * ccra_core::math::twiddle(f as u64 * l as u64, n))
                        .sum();
                    sum += (h_est - h.response_at(f, n)).norm_sqr() / probe.len() as f64;
                }
                users += 1;
            }
            Ok((sum, users))
        })
        .collect::<Result<_, SolveError>>()?;
    let (sum, users) = parts.iter().fold((0.0, 0), |a, p| (a.0 + p.0, a.1 + p.1));
    Ok(EstimationError { mse: if users == 0 { 0.0 } else { sum / users as f64 }, users })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureMcOptions {
    pub jmax: usize,
    pub trials: usize,
    pub mode: CaptureMode,
    /// Per-subcarrier variance of the channel estimation error.
    pub est_error_var: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CaptureMcError {
    #[error("insufficient trials for requested precision")]
    NoTrials,
    #[error(transparent)]
    Table(#[from] AnalysisError),
}

/// One slot with `j` users of which `t` have been cancelled; does the
/// candidate get captured?
fn capture_trial(cfg: &CheckedConfig, opts: &CaptureMcOptions, t: usize, j: usize, seed: StreamSeed) -> bool {
    let c = cfg.config();
    let n = cfg.n();
    let sub = cfg.slot_subcarriers(0);
    let w = sub.len();
    let degree = cfg.mean_degree().round().max(1.0) as usize;
    let amp = data_amplitude(cfg, degree);
    let bps = c.modulation.bits_per_symbol();
    let mut rng = seed.rng("capture-slot");
    let mut truth = Vec::with_capacity(j);
    let mut est = Vec::with_capacity(j);
    let mut bits = Vec::with_capacity(j);
    let mut symbols = Vec::with_capacity(j);
    for u in 0..j {
        let h = gen_channel(u, c.k1, c.s_d, &mut rng).response_on(sub, n);
        let e: Vec<Complex64> = h.iter().map(|v| v + complex_normal(&mut rng, opts.est_error_var)).collect();
        let b: Vec<u8> = (0..w * bps).map(|_| rng.gen_range(0..2u8)).collect();
        symbols.push(b.chunks_exact(bps).map(|x| c.modulation.map(x)).collect::<Vec<_>>());
        bits.push(b);
        truth.push(h);
        est.push(e);
    }
    let mut y = vec![Complex64::new(0.0, 0.0); w];
    for u in 0..j {
        for (f, o) in y.iter_mut().enumerate() {
            *o += truth[u][f] * amp * symbols[u][f];
        }
    }
    if c.noise_var > 0.0 {
        y.iter_mut().for_each(|v| *v += complex_normal(&mut rng, c.noise_var));
    }
    let mut obs = SlotObservation::new(0, y, (0..j).collect());
    // Users 1..=t were decoded elsewhere and are removed with their
    // estimated channels.
    for u in 1..=t {
        let residue = residue_power(ResidualModel::Genie, &est[u], Some(&truth[u]), amp);
        cancel_replica(&mut obs, u, &est[u], &symbols[u], amp, &residue).expect("user present");
    }
    let colliders: Vec<Interferer<'_>> =
        (t + 1..j).map(|u| Interferer { h_est: &est[u], amplitude: amp }).collect();
    let cand = Candidate { h_est: &est[0], amplitude: amp, tx_bits: Some(&bits[0]) };
    capture_decide(&obs, &cand, opts.mode, c.modulation, c.noise_var, &colliders)
}

/// Capture table `C(t, j)` estimated by slot-level Monte Carlo, made
/// monotone where sampling noise broke the ordering. The flag reports
/// whether any entry had to be adjusted.
pub fn capture_table_from_phy(
    cfg: &CheckedConfig,
    opts: &CaptureMcOptions,
    seed: StreamSeed,
) -> Result<(CaptureTable, bool), CaptureMcError> {
    if opts.trials == 0 {
        return Err(CaptureMcError::NoTrials);
    }
    let cells: Vec<(usize, usize)> = (1..=opts.jmax).flat_map(|j| (0..j).map(move |t| (t, j))).collect();
    let rates: Vec<f64> = cells
        .par_iter()
        .map(|&(t, j)| {
            let s = seed.derive((j * (j - 1) / 2 + t) as u64);
            let hits = (0..opts.trials).filter(|&k| capture_trial(cfg, opts, t, j, s.derive(k as u64))).count();
            hits as f64 / opts.trials as f64
        })
        .collect();
    let mut rows: Vec<Vec<f64>> = (1..=opts.jmax).map(|j| Vec::with_capacity(j)).collect();
    for (&(_, j), r) in cells.iter().zip(rates) {
        rows[j - 1].push(r);
    }
    Ok(CaptureTable::from_rows(rows, None)?)
}
