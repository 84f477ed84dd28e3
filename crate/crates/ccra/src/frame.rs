//! Signal-level frames: synthesize, recover the control channel, detect,
//! then run SIC over the data slots with real equalization and replica
//! cancellation.

use ccra_core::analysis::c1_of_delta;
use ccra_core::channel::{gen_channel, ChannelRealization};
use ccra_core::mac::{build_graph, run_sic, FrameResult, SlotDecoder, SlotGraph, SlotState, MAX_ROUNDS};
use ccra_core::math::twiddle;
use ccra_core::phy::{
    cancel_replica, capture_decide, compute_ser, equalize_demod, slot_sinr, Demodulated, estimation_error_proxy, residue_power, Candidate,
    CaptureMode, Interferer, ResidualModel, SlotObservation,
};
use ccra_core::solver::{ActivityEstimate, SolveError, SolverReport};
use ccra_core::stats::Proportion;
use ccra_core::{CheckedConfig, Modulation, StreamSeed};
use num_complex::Complex64;
use rand::seq::index;

use crate::recovery::{Receiver, ReceiverConfig};
use crate::signal::{gen_payload, synthesize_rx, SignalError, TxPayload};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualKind {
    /// Book the true `|H_est - H|^2` after each cancellation.
    Genie,
    /// Book the bound-based proxy with the given RIP constant.
    Proxy { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyOptions {
    pub capture: CaptureMode,
    pub residual: ResidualKind,
}

/// Capture threshold used by default, in dB.
pub const DEFAULT_CAPTURE_DB: f64 = 6.0;

impl Default for PhyOptions {
    /// A user is captured once its estimated SINR clears the threshold; its
    /// hard decisions, errors included, are what gets cancelled and scored.
    fn default() -> Self {
        PhyOptions { capture: CaptureMode::sinr_db(DEFAULT_CAPTURE_DB), residual: ResidualKind::Genie }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("invalid residual model: {0}")]
    Residual(String),
}

/// Outcome of one signal-level frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyFrame {
    pub result: FrameResult,
    /// Symbol errors over the data of every active user, scored on the
    /// decisions the receiver ends up with.
    pub symbols: Proportion,
    /// Active users whose preamble was not detected.
    pub missed: usize,
    /// Detected preambles that no active user chose.
    pub false_alarms: usize,
    /// Preambles nobody chose (the false-alarm denominator).
    pub inactive: usize,
    pub solver: SolverReport,
}

/// Time-domain frame with its ground truth, for inspection and dumps.
#[derive(Debug, Clone)]
pub struct FrameSignals {
    pub choices: Vec<u64>,
    pub channels: Vec<ChannelRealization>,
    pub payload: TxPayload,
    pub y: Vec<Complex64>,
}

pub struct PhySimulator {
    pub receiver: Receiver,
    pub phy: PhyOptions,
    proxy: f64,
}

impl PhySimulator {
    pub fn new(cfg: CheckedConfig, rx: ReceiverConfig, phy: PhyOptions) -> Result<Self, FrameError> {
        let receiver = Receiver::new(cfg, rx);
        let proxy = match phy.residual {
            ResidualKind::Genie => 0.0,
            ResidualKind::Proxy { delta } => {
                let c1 = c1_of_delta(delta).map_err(|e| FrameError::Residual(e.to_string()))?;
                let c = receiver.cfg.config();
                estimation_error_proxy(c1, receiver.rx.epsilon(&receiver.cfg), c.n, c.alpha, c.k2)
            }
        };
        Ok(PhySimulator { receiver, phy, proxy })
    }

    pub fn cfg(&self) -> &CheckedConfig {
        &self.receiver.cfg
    }

    /// Draws the active users and synthesizes the received symbol.
    pub fn synthesize(&self, seed: StreamSeed) -> Result<FrameSignals, FrameError> {
        let cfg = &self.receiver.cfg;
        let c = cfg.config();
        // Active users are distinct members of the population, each owning
        // its preamble, so no two share one.
        let mut choices: Vec<u64> =
            index::sample(&mut seed.rng("active-set"), c.num_users, c.k2).into_iter().map(|u| u as u64).collect();
        choices.sort_unstable();
        let channels: Vec<ChannelRealization> = (0..c.k2)
            .map(|i| gen_channel(i, c.k1, c.s_d, &mut seed.derive(i as u64).rng("channel")))
            .collect();
        let payload = gen_payload(cfg, self.receiver.preambles.patterns(), &choices, seed.labeled("payload"));
        let y = synthesize_rx(
            cfg,
            &self.receiver.dft,
            &self.receiver.preambles,
            &channels,
            &payload,
            seed.labeled("noise"),
        )?;
        Ok(FrameSignals { choices, channels, payload, y })
    }

    pub fn run_frame(&self, seed: StreamSeed) -> Result<PhyFrame, FrameError> {
        let sig = self.synthesize(seed)?;
        self.decode(&sig)
    }

    /// Receiver processing of a synthesized frame.
    pub fn decode(&self, sig: &FrameSignals) -> Result<PhyFrame, FrameError> {
        let cfg = &self.receiver.cfg;
        let c = cfg.config();
        let n = cfg.n();
        let spectrum = self.receiver.dft.forward_vec(&sig.y);
        let y_b: Vec<Complex64> = cfg.band().iter().map(|&f| spectrum[f]).collect();
        let rec = self.receiver.recover(&y_b)?;
        let solver = rec.report.clone();
        let est = self.receiver.detect(&rec);

        let graph = build_graph(self.receiver.preambles.patterns(), &sig.choices);
        let detected: Vec<bool> = sig.choices.iter().map(|&p| est.is_detected(p as usize)).collect();
        let eligible: Vec<bool> =
            graph.users.iter().zip(&detected).map(|(u, &d)| d && !u.preamble_collided).collect();

        let mut chosen = vec![false; c.num_users];
        sig.choices.iter().for_each(|&p| chosen[p as usize] = true);
        let missed = detected.iter().filter(|d| !**d).count();
        let false_alarms = est.detected.iter().filter(|&&u| !chosen[u]).count();
        let inactive = chosen.iter().filter(|c| !**c).count();

        let estimates: Vec<Option<Vec<Vec<Complex64>>>> = graph
            .users
            .iter()
            .zip(&sig.choices)
            .zip(&detected)
            .map(|((node, &p), &d)| d.then(|| node.slots.iter().map(|&b| block_response(&est, p as usize, cfg.slot_subcarriers(b), n)).collect()))
            .collect();
        let truth: Vec<Vec<Vec<Complex64>>> = graph
            .users
            .iter()
            .zip(&sig.channels)
            .map(|(node, h)| node.slots.iter().map(|&b| h.response_on(cfg.slot_subcarriers(b), n)).collect())
            .collect();
        let obs: Vec<SlotObservation> = (0..cfg.num_slots())
            .map(|b| {
                let y = cfg.slot_subcarriers(b).iter().map(|&f| spectrum[f]).collect();
                SlotObservation::new(b, y, graph.slot_users[b].clone())
            })
            .collect();

        let residual = match self.phy.residual {
            ResidualKind::Genie => ResidualModel::Genie,
            ResidualKind::Proxy { .. } => ResidualModel::Proxy(self.proxy),
        };
        let mut dec = PhyDecoder {
            graph: &graph,
            payload: &sig.payload,
            estimates: &estimates,
            truth: &truth,
            obs,
            decided: vec![None; graph.users.len()],
            modulation: c.modulation,
            noise_var: c.noise_var,
            capture: self.phy.capture,
            residual,
        };
        let trace = run_sic(&graph, &eligible, &mut dec, MAX_ROUNDS);
        let symbols = dec.finish();
        let result = FrameResult::assemble(&graph, &detected, &trace);
        Ok(PhyFrame { result, symbols, missed, false_alarms, inactive, solver })
    }
}

/// Estimated response of preamble block `u` on the given subcarriers.
fn block_response(est: &ActivityEstimate, u: usize, subcarriers: &[usize], n: usize) -> Vec<Complex64> {
    let block = est.block(u);
    subcarriers
        .iter()
        .map(|&f| {
            block
                .iter()
                .enumerate()
                .filter(|(_, v)| v.norm_sqr() > 0.0)
                .map(|(l, v)| v * twiddle(f as u64 * l as u64, n))
                .sum()
        })
        .collect()
}

struct PhyDecoder<'a> {
    graph: &'a SlotGraph,
    payload: &'a TxPayload,
    estimates: &'a [Option<Vec<Vec<Complex64>>>],
    truth: &'a [Vec<Vec<Complex64>>],
    obs: Vec<SlotObservation>,
    /// Symbols and bits of the replica that was captured.
    decided: Vec<Option<Demodulated>>,
    modulation: Modulation,
    noise_var: f64,
    capture: CaptureMode,
    residual: ResidualModel,
}

impl PhyDecoder<'_> {
    fn replica(&self, user: usize, slot: usize) -> usize {
        self.graph.users[user].slots.binary_search(&slot).expect("slot in user's pattern")
    }

    /// Detected users still present in `slot` other than `user`.
    fn interferers(&self, user: usize, slot: usize) -> Vec<Interferer<'_>> {
        self.obs[slot]
            .users
            .iter()
            .filter(|&&v| v != user)
            .filter_map(|&v| {
                let kv = self.replica(v, slot);
                self.estimates[v]
                    .as_ref()
                    .map(|h| Interferer { h_est: &h[kv], amplitude: self.payload.users[v].amplitude })
            })
            .collect()
    }

    /// Bits the receiver settles on for `user`: the captured replica if
    /// there is one, else the replica with the best estimated SINR at the
    /// fixpoint. Undetected users are scored as guessing all-zero bits.
    fn final_bits(&self, user: usize) -> Vec<u8> {
        let tx = &self.payload.users[user];
        if let Some(d) = &self.decided[user] {
            return d.bits.clone();
        }
        let Some(est) = &self.estimates[user] else { return vec![0; tx.bits.len()] };
        let best = self.graph.users[user]
            .slots
            .iter()
            .enumerate()
            .map(|(k, &slot)| {
                let colliders = self.interferers(user, slot);
                (slot_sinr(&self.obs[slot], &est[k], tx.amplitude, self.noise_var, &colliders), k, slot)
            })
            .fold(None, |acc: Option<(f64, usize, usize)>, c| match acc {
                Some(a) if a.0 >= c.0 => Some(a),
                _ => Some(c),
            });
        match best {
            Some((_, k, slot)) => match equalize_demod(&self.obs[slot], &est[k], self.modulation, tx.amplitude) {
                Ok(d) => d.bits,
                Err(_) => vec![0; tx.bits.len()],
            },
            None => vec![0; tx.bits.len()],
        }
    }

    fn finish(&self) -> Proportion {
        let bps = self.modulation.bits_per_symbol();
        (0..self.graph.users.len()).fold(Proportion::new(0, 0), |acc, u| {
            let ser = compute_ser(&self.payload.users[u].bits, &self.final_bits(u), bps).expect("equal lengths");
            acc.merge(ser)
        })
    }
}

impl SlotDecoder for PhyDecoder<'_> {
    fn try_decode(&mut self, user: usize, state: &SlotState<'_>) -> bool {
        let Some(est) = &self.estimates[user] else { return false };
        let k = self.replica(user, state.slot);
        let colliders = self.interferers(user, state.slot);
        let tx = &self.payload.users[user];
        let cand = Candidate { h_est: &est[k], amplitude: tx.amplitude, tx_bits: Some(&tx.bits) };
        let obs = &self.obs[state.slot];
        if !capture_decide(obs, &cand, self.capture, self.modulation, self.noise_var, &colliders) {
            return false;
        }
        match equalize_demod(obs, &est[k], self.modulation, tx.amplitude) {
            Ok(d) => {
                self.decided[user] = Some(d);
                true
            }
            Err(_) => false,
        }
    }

    fn cancel(&mut self, user: usize, slot: usize) {
        let k = self.replica(user, slot);
        let est = &self.estimates[user].as_ref().expect("decoded users are detected")[k];
        let amp = self.payload.users[user].amplitude;
        let residue = residue_power(self.residual, est, Some(&self.truth[user][k]), amp);
        let symbols = &self.decided[user].as_ref().expect("cancel after decode").symbols;
        cancel_replica(&mut self.obs[slot], user, est, symbols, amp, &residue).expect("user present in slot");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccra_core::SystemConfig;

    fn small(alpha: f64, k2: usize) -> CheckedConfig {
        let mut c = SystemConfig::scaled();
        c.alpha = alpha;
        c.k2 = k2;
        CheckedConfig::new(c).unwrap()
    }

    #[test]
    fn frame_is_deterministic_and_conserves_users() {
        let sim = PhySimulator::new(small(0.21, 5), ReceiverConfig::default(), PhyOptions::default()).unwrap();
        let a = sim.run_frame(StreamSeed::new(11)).unwrap();
        let b = sim.run_frame(StreamSeed::new(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.result.decoded() + a.result.lost(), 5);
        assert!(a.result.decoded() <= a.result.detected());
        assert_eq!(a.symbols.trials, 5 * sim.cfg().slot_width() as u64);
    }

    #[test]
    fn healthy_operating_point_decodes() {
        let sim = PhySimulator::new(small(0.21, 5), ReceiverConfig::default(), PhyOptions::default()).unwrap();
        let mut decoded = 0;
        for t in 0..10 {
            decoded += sim.run_frame(StreamSeed::new(100 + t)).unwrap().result.decoded();
        }
        assert!(decoded >= 40, "decoded {decoded} of 50");
    }

    #[test]
    fn no_data_power_means_guessing() {
        let sim = PhySimulator::new(small(1.0, 5), ReceiverConfig::default(), PhyOptions::default()).unwrap();
        let mut total = Proportion::new(0, 0);
        for t in 0..10 {
            total = total.merge(sim.run_frame(StreamSeed::new(t)).unwrap().symbols);
        }
        assert!((total.rate() - 0.5).abs() < 0.03, "ser {}", total.rate());
    }

    #[test]
    fn empty_frame() {
        let sim = PhySimulator::new(small(0.21, 0), ReceiverConfig::default(), PhyOptions::default()).unwrap();
        let f = sim.run_frame(StreamSeed::new(1)).unwrap();
        assert_eq!(f.result.throughput(), 0.0);
        assert_eq!(f.result.rounds, 0);
        assert_eq!(f.symbols.trials, 0);
    }
}
