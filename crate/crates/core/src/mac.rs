//! Coded slotted ALOHA over frequency slots: the user/slot graph and the
//! iterative successive-interference-cancellation (SIC) loop.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::CaptureTable;
use crate::model::CheckedConfig;
use crate::preamble::PatternMap;
use crate::seed::StreamSeed;
use crate::stats::{Moments, Proportion};

/// SIC round cap.
pub const MAX_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserNode {
    pub preamble: u64,
    /// Sorted, distinct slot indices.
    pub slots: Vec<usize>,
    /// Another active user chose the same preamble.
    pub preamble_collided: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotGraph {
    pub num_slots: usize,
    pub users: Vec<UserNode>,
    /// Incident users per slot, ascending.
    pub slot_users: Vec<Vec<usize>>,
}

impl SlotGraph {
    /// Graph from explicit replica patterns. Users with equal preamble
    /// indices are flagged as collided.
    pub fn from_patterns(num_slots: usize, preambles: &[u64], patterns: Vec<Vec<usize>>) -> Self {
        assert_eq!(preambles.len(), patterns.len());
        let mut sorted: Vec<u64> = preambles.to_vec();
        sorted.sort_unstable();
        let collided = |p: u64| {
            let i = sorted.partition_point(|&x| x < p);
            i + 1 < sorted.len() && sorted[i + 1] == p
        };
        let mut slot_users = vec![Vec::new(); num_slots];
        let mut users = Vec::with_capacity(preambles.len());
        for (u, (&p, mut slots)) in preambles.iter().zip(patterns).enumerate() {
            slots.sort_unstable();
            slots.dedup();
            for &s in &slots {
                slot_users[s].push(u);
            }
            users.push(UserNode { preamble: p, slots, preamble_collided: collided(p) });
        }
        SlotGraph { num_slots, users, slot_users }
    }

    pub fn num_edges(&self) -> usize {
        self.users.iter().map(|u| u.slots.len()).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.users.iter().enumerate().flat_map(|(u, n)| n.slots.iter().map(move |&s| (u, s)))
    }

    pub fn slot_degrees(&self) -> Vec<usize> {
        self.slot_users.iter().map(Vec::len).collect()
    }
}

/// Graph induced by the pattern map for the given preamble choices.
pub fn build_graph(patterns: &PatternMap, choices: &[u64]) -> SlotGraph {
    let pats = choices.iter().map(|&p| patterns.pattern(p).slots).collect();
    SlotGraph::from_patterns(patterns.num_slots(), choices, pats)
}

/// What a decoder sees when asked to capture a user in a slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotState<'a> {
    pub slot: usize,
    /// Degree before any cancellation.
    pub degree: usize,
    /// Users not yet cancelled from the slot (including the candidate).
    pub remaining: &'a [usize],
}

impl SlotState<'_> {
    pub fn cancelled(&self) -> usize {
        self.degree - self.remaining.len()
    }
}

/// Per-slot capture and cancellation, abstract or signal-level.
pub trait SlotDecoder {
    fn try_decode(&mut self, user: usize, state: &SlotState<'_>) -> bool;
    /// Removes `user`'s replica from `slot`.
    fn cancel(&mut self, user: usize, slot: usize);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SicTrace {
    /// `(round, slot)` of decoding, rounds counted from 1.
    pub decoded_at: Vec<Option<(usize, usize)>>,
    /// Rounds that decoded at least one user.
    pub rounds: usize,
    pub attempts: usize,
    pub slot_remaining: Vec<Vec<usize>>,
}

/// Runs SIC to its fixpoint. Each round first tries every eligible,
/// undecoded user in every slot against the state at the start of the
/// round, then cancels all replicas of the users it decoded. A (user, slot)
/// pair is retried only after the slot changed.
pub fn run_sic<D: SlotDecoder + ?Sized>(
    graph: &SlotGraph,
    eligible: &[bool],
    decoder: &mut D,
    max_rounds: usize,
) -> SicTrace {
    let nu = graph.users.len();
    assert_eq!(eligible.len(), nu);
    let mut remaining = graph.slot_users.clone();
    let degrees = graph.slot_degrees();
    let mut decoded_at: Vec<Option<(usize, usize)>> = vec![None; nu];
    // Slot size at the last attempt, per (slot, position in slot_users).
    let mut tried: Vec<Vec<usize>> = graph.slot_users.iter().map(|v| vec![usize::MAX; v.len()]).collect();
    let mut rounds = 0;
    let mut attempts = 0;
    let mut total_decoded = 0;
    for round in 1..=max_rounds {
        let mut fresh = Vec::new();
        for s in 0..graph.num_slots {
            let size = remaining[s].len();
            for i in 0..size {
                let u = remaining[s][i];
                if !eligible[u] || decoded_at[u].is_some() {
                    continue;
                }
                let pos = graph.slot_users[s].binary_search(&u).expect("user incident to slot");
                if tried[s][pos] == size {
                    continue;
                }
                tried[s][pos] = size;
                attempts += 1;
                let state = SlotState { slot: s, degree: degrees[s], remaining: &remaining[s] };
                if decoder.try_decode(u, &state) {
                    decoded_at[u] = Some((round, s));
                    fresh.push(u);
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        rounds = round;
        let before = total_decoded;
        total_decoded += fresh.len();
        assert!(total_decoded > before && total_decoded <= nu, "SIC progress must be monotone");
        for &u in &fresh {
            for &s in &graph.users[u].slots {
                decoder.cancel(u, s);
                remaining[s].retain(|&v| v != u);
            }
        }
    }
    SicTrace { decoded_at, rounds, attempts, slot_remaining: remaining }
}

/// Capture drawn from a table of probabilities `pi_{t,j}`.
pub struct TableDecoder<'a> {
    pub table: &'a CaptureTable,
    pub rng: ChaCha8Rng,
}

impl SlotDecoder for TableDecoder<'_> {
    fn try_decode(&mut self, _user: usize, state: &SlotState<'_>) -> bool {
        let p = self.table.get(state.cancelled(), state.degree);
        if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            self.rng.gen::<f64>() < p
        }
    }

    fn cancel(&mut self, _user: usize, _slot: usize) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossCause {
    PreambleCollision,
    Undetected,
    Undecodable,
}

impl LossCause {
    pub fn as_str(self) -> &'static str {
        match self {
            LossCause::PreambleCollision => "preamble-collision",
            LossCause::Undetected => "undetected",
            LossCause::Undecodable => "undecodable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserOutcome {
    Decoded { round: usize, slot: usize },
    Lost(LossCause),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub preamble: u64,
    pub degree: usize,
    pub detected: bool,
    pub outcome: UserOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameResult {
    pub users: Vec<UserRecord>,
    pub num_slots: usize,
    pub rounds: usize,
    /// Uncancelled users per slot at the fixpoint.
    pub final_slot_degrees: Vec<usize>,
}

impl FrameResult {
    /// Combines the graph, the control-channel detection flags and the SIC
    /// trace. Preamble-collided users are never decodable.
    pub fn assemble(graph: &SlotGraph, detected: &[bool], trace: &SicTrace) -> Self {
        let users = graph
            .users
            .iter()
            .enumerate()
            .map(|(u, node)| {
                let outcome = match trace.decoded_at[u] {
                    Some((round, slot)) => UserOutcome::Decoded { round, slot },
                    None if node.preamble_collided => UserOutcome::Lost(LossCause::PreambleCollision),
                    None if !detected[u] => UserOutcome::Lost(LossCause::Undetected),
                    None => UserOutcome::Lost(LossCause::Undecodable),
                };
                UserRecord { preamble: node.preamble, degree: node.slots.len(), detected: detected[u], outcome }
            })
            .collect();
        FrameResult {
            users,
            num_slots: graph.num_slots,
            rounds: trace.rounds,
            final_slot_degrees: trace.slot_remaining.iter().map(Vec::len).collect(),
        }
    }

    pub fn active(&self) -> usize {
        self.users.len()
    }

    pub fn decoded(&self) -> usize {
        self.users.iter().filter(|u| matches!(u.outcome, UserOutcome::Decoded { .. })).count()
    }

    pub fn detected(&self) -> usize {
        self.users.iter().filter(|u| u.detected).count()
    }

    pub fn lost(&self) -> usize {
        self.active() - self.decoded()
    }

    pub fn lost_by(&self, cause: LossCause) -> usize {
        self.users.iter().filter(|u| u.outcome == UserOutcome::Lost(cause)).count()
    }

    /// Decoded users per slot.
    pub fn throughput(&self) -> f64 {
        if self.num_slots == 0 {
            0.0
        } else {
            self.decoded() as f64 / self.num_slots as f64
        }
    }
}

/// Frame description for abstract (table-driven) simulation. The preamble
/// space may be far larger than a configuration's `U`.
#[derive(Debug, Clone, Copy)]
pub struct AbstractFrame<'a> {
    pub patterns: &'a PatternMap,
    pub num_preambles: u64,
    pub active: usize,
    pub capture: &'a CaptureTable,
}

/// Uniform preamble choices with replacement.
pub fn choose_preambles(num_preambles: u64, active: usize, seed: StreamSeed) -> Vec<u64> {
    let mut rng = seed.rng("preamble-choice");
    (0..active).map(|_| rng.gen_range(0..num_preambles)).collect()
}

/// One abstract frame: every non-collided user counts as detected and
/// capture follows the table.
pub fn run_abstract_frame(frame: &AbstractFrame<'_>, seed: StreamSeed) -> FrameResult {
    let choices = choose_preambles(frame.num_preambles, frame.active, seed);
    let graph = build_graph(frame.patterns, &choices);
    let detected: Vec<bool> = graph.users.iter().map(|u| !u.preamble_collided).collect();
    let mut dec = TableDecoder { table: frame.capture, rng: seed.rng("capture") };
    let trace = run_sic(&graph, &detected, &mut dec, MAX_ROUNDS);
    FrameResult::assemble(&graph, &detected, &trace)
}

/// Abstract frame at a configuration's own scale (`U` preambles, `k2`
/// active, its pattern map).
pub fn run_frame_abstract(cfg: &CheckedConfig, capture: &CaptureTable, seed: StreamSeed) -> FrameResult {
    let patterns = PatternMap::from_config(cfg);
    let c = cfg.config();
    let frame =
        AbstractFrame { patterns: &patterns, num_preambles: c.num_users as u64, active: c.k2, capture };
    run_abstract_frame(&frame, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputSummary {
    pub frames: usize,
    /// Mean decoded users per slot.
    pub throughput: f64,
    pub throughput_moments: Moments,
    /// Pooled `lost / active`.
    pub loss: Proportion,
    /// Per-frame loss fractions (frames with active users only).
    pub loss_moments: Moments,
    /// Counts per cause: preamble collision, undetected, undecodable.
    pub causes: [u64; 3],
}

impl ThroughputSummary {
    pub fn loss_rate(&self) -> f64 {
        self.loss.rate()
    }

    pub fn loss_wilson95(&self) -> (f64, f64) {
        self.loss.wilson95()
    }
}

/// Aggregates frames; `None` for an empty input.
pub fn throughput(results: &[FrameResult]) -> Option<ThroughputSummary> {
    if results.is_empty() {
        return None;
    }
    let mut tm = Moments::default();
    let mut lm = Moments::default();
    let mut loss = Proportion::new(0, 0);
    let mut causes = [0u64; 3];
    for r in results {
        tm.push(r.throughput());
        if r.active() > 0 {
            lm.push(r.lost() as f64 / r.active() as f64);
        }
        loss = loss.merge(Proportion::new(r.lost() as u64, r.active() as u64));
        causes[0] += r.lost_by(LossCause::PreambleCollision) as u64;
        causes[1] += r.lost_by(LossCause::Undetected) as u64;
        causes[2] += r.lost_by(LossCause::Undecodable) as u64;
    }
    Some(ThroughputSummary {
        frames: results.len(),
        throughput: tm.mean(),
        throughput_moments: tm,
        loss,
        loss_moments: lm,
        causes,
    })
}
