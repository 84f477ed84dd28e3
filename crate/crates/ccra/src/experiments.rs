//! Sweep runners behind the CLI subcommands. Every trial seed is derived
//! from `(master_seed, point, trial)`, and per-point aggregation folds the
//! trial results in trial order, so the thread count never changes output.

use ccra_core::analysis::{
    conditioned_gains, de_at_load, de_threshold, rate_bound_collision, rate_bound_singleton, AnalysisError, CaptureTable,
    DeConvention, DeOptions, DegreeDistribution, RateBoundInputs,
};
use ccra_core::mac::{run_abstract_frame, throughput, AbstractFrame, FrameResult, ThroughputSummary};
use ccra_core::preamble::PatternMap;
use ccra_core::stats::Proportion;
use ccra_core::StreamSeed;
use rayon::prelude::*;

use crate::config::{ConfigFileError, RunConfig, SweepParam, SweepSpec};
use crate::frame::{FrameError, PhyFrame, PhySimulator};

/// Preamble space used by abstract MAC runs unless overridden: large enough
/// that preamble collisions essentially never happen.
pub const IDEAL_PREAMBLES: u64 = 1 << 40;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Other(String),
}

pub fn point_seed(master: u64, point: usize) -> StreamSeed {
    StreamSeed::new(master).derive(point as u64)
}

/// Aggregate of full-phy frames at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyPoint {
    pub param: f64,
    pub trials: usize,
    pub ser: Proportion,
    pub missed: Proportion,
    pub false_alarm: Proportion,
    pub mean_solver_iters: f64,
    /// Frames whose solver stopped on its iteration cap.
    pub nonconverged: usize,
}

impl PhyPoint {
    pub fn fold(param: f64, frames: &[PhyFrame]) -> Self {
        let mut p = PhyPoint {
            param,
            trials: frames.len(),
            ser: Proportion::new(0, 0),
            missed: Proportion::new(0, 0),
            false_alarm: Proportion::new(0, 0),
            mean_solver_iters: 0.0,
            nonconverged: 0,
        };
        let mut iters = 0usize;
        for f in frames {
            p.ser = p.ser.merge(f.symbols);
            p.missed = p.missed.merge(Proportion::new(f.missed as u64, f.result.active() as u64));
            p.false_alarm = p.false_alarm.merge(Proportion::new(f.false_alarms as u64, (f.inactive + f.false_alarms) as u64));
            iters += f.solver.iterations;
            p.nonconverged += usize::from(!f.solver.converged);
        }
        if !frames.is_empty() {
            p.mean_solver_iters = iters as f64 / frames.len() as f64;
        }
        p
    }
}

/// Runs `trials` full-phy frames of one configuration.
pub fn phy_frames(cfg: &RunConfig, seed: StreamSeed, trials: usize) -> Result<Vec<PhyFrame>, RunError> {
    let sim = PhySimulator::new(cfg.system.clone(), cfg.receiver.clone(), cfg.phy)?;
    let frames = (0..trials)
        .into_par_iter()
        .map(|t| sim.run_frame(seed.derive(t as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(frames)
}

pub fn phy_sweep(cfg: &RunConfig, sweep: &SweepSpec, trials: usize) -> Result<Vec<PhyPoint>, RunError> {
    sweep
        .grid
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = sweep.apply(cfg, v)?;
            let frames = phy_frames(&c, point_seed(cfg.master_seed(), i), trials)?;
            Ok(PhyPoint::fold(v, &frames))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MacPoint {
    pub load: f64,
    pub active: usize,
    pub frames: Vec<FrameResult>,
    pub summary: ThroughputSummary,
    /// Density-evolution loss prediction at this load, when requested.
    pub de_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum MacMode<'a> {
    Abstract { capture: &'a CaptureTable, num_preambles: u64 },
    FullPhy,
}

/// Active users for load `g`.
pub fn active_for_load(g: f64, slots: usize) -> usize {
    (g * slots as f64).round().max(0.0) as usize
}

/// Frame-level simulation over a grid of loads. `sweep` must be over
/// `load_G` or `active_users`.
pub fn mac_sim(
    cfg: &RunConfig,
    sweep: &SweepSpec,
    frames: usize,
    mode: &MacMode<'_>,
    de_overlay: Option<&CaptureTable>,
) -> Result<Vec<MacPoint>, RunError> {
    let slots = cfg.system.num_slots();
    let dist = DegreeDistribution::new(&cfg.system.config().degree_dist)?;
    let patterns = PatternMap::from_config(&cfg.system);
    let mut out = Vec::with_capacity(sweep.grid.len());
    for (i, &v) in sweep.grid.iter().enumerate() {
        let active = match sweep.param {
            SweepParam::LoadG => active_for_load(v, slots),
            SweepParam::ActiveUsers => v.round().max(0.0) as usize,
            p => return Err(RunError::Other(format!("mac-sim sweeps load_G or active_users, not {}", p.name()))),
        };
        let load = active as f64 / slots as f64;
        let seed = point_seed(cfg.master_seed(), i);
        let results: Vec<FrameResult> = match mode {
            MacMode::Abstract { capture, num_preambles } => {
                let frame = AbstractFrame { patterns: &patterns, num_preambles: *num_preambles, active, capture };
                (0..frames).into_par_iter().map(|t| run_abstract_frame(&frame, seed.derive(t as u64))).collect()
            }
            MacMode::FullPhy => {
                let c = cfg.with(|f| f.k2 = active)?;
                phy_frames(&c, seed, frames)?.into_iter().map(|f| f.result).collect()
            }
        };
        let summary = throughput(&results).ok_or_else(|| RunError::Other("no frames".into()))?;
        let de_loss = match de_overlay {
            Some(table) => Some(1.0 - de_at_load(load, &dist, table, &DeOptions::default())?.p_decoded_node),
            None => None,
        };
        out.push(MacPoint { load, active, frames: results, summary, de_loss });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeRow {
    pub load: f64,
    pub p_decoded: f64,
    pub p_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn de_curve(
    dist: &DegreeDistribution,
    capture: &CaptureTable,
    loads: &[f64],
    convention: DeConvention,
) -> Result<Vec<DeRow>, AnalysisError> {
    let opts = DeOptions { convention, ..DeOptions::default() };
    loads
        .iter()
        .map(|&g| {
            let r = de_at_load(g, dist, capture, &opts)?;
            Ok(DeRow {
                load: g,
                p_decoded: r.p_decoded_node,
                p_loss: 1.0 - r.p_decoded_node,
                iterations: r.iterations,
                converged: r.converged,
            })
        })
        .collect()
}

/// Load threshold: largest `G` at which the recursion drives the slot-side
/// unresolved probability below `1e-6`, bisected to `tol`.
pub fn threshold(dist: &DegreeDistribution, capture: &CaptureTable, tol: f64, convention: DeConvention) -> Result<f64, AnalysisError> {
    let opts = DeOptions { convention, ..DeOptions::default() };
    de_threshold(dist, capture, 1e-3, 2.0, 1e-6, tol, &opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub alpha: f64,
    pub singleton: f64,
    /// One entry per requested collider count.
    pub collision: Vec<f64>,
}

/// Rate bounds over an alpha grid. Gains are sampled once, conditioned on
/// detection at `xi`, and shared by every row.
pub fn bound_curves(
    cfg: &RunConfig,
    alphas: &[f64],
    colliders: &[usize],
    p_detect: f64,
    gain_trials: usize,
) -> Result<Vec<BoundRow>, AnalysisError> {
    let c = cfg.system.config();
    let gains = conditioned_gains(&cfg.system, cfg.receiver.xi, gain_trials, 16, cfg.system.seed().labeled("bounds"))?;
    alphas
        .iter()
        .map(|&alpha| {
            let base = RateBoundInputs {
                alpha,
                noise_var: c.noise_var,
                m: cfg.system.m(),
                n: c.n,
                k2: c.k2,
                delta: cfg.file.rip_delta,
                p_detect,
                colliders: 0,
                gain_samples: gains.samples.clone(),
            };
            let singleton = rate_bound_singleton(&base)?;
            let collision = colliders
                .iter()
                .map(|&k| rate_bound_collision(&RateBoundInputs { colliders: k, ..base.clone() }))
                .collect::<Result<_, _>>()?;
            Ok(BoundRow { alpha, singleton, collision })
        })
        .collect()
}
