use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccra::capture::{capture_table_from_phy, estimation_mse, CaptureMcOptions};
use ccra::config::{RunConfig, SweepSpec};
use ccra::experiments::{self, MacMode, RunError, IDEAL_PREAMBLES};
use ccra::output::{self, num, CsvOut, FrameLine};
use ccra::recovery::{calibrate_threshold, estimate_pmd_pfa, Receiver};
use ccra_core::analysis::{CaptureTable, DeConvention, DegreeDistribution};
use ccra_core::mac::LossCause;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ccra", version, about = "Compressive coded random access simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; the scaled default is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output CSV path (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sweep as NAME=START:STEP:STOP or NAME=v1,v2,...
    #[arg(long, global = true)]
    sweep: Option<String>,
    /// Trials (frames) per grid point.
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Abstract,
    FullPhy,
}

#[derive(Subcommand)]
enum Command {
    /// Symbol error rate of full-phy frames over a parameter grid.
    PhySweep,
    /// Frame-level throughput and loss over a load grid.
    MacSim {
        #[arg(long, value_enum, default_value = "abstract")]
        mode: Mode,
        /// Capture table (`j,t,p` CSV) for abstract mode and the DE overlay.
        #[arg(long)]
        capture_table: Option<PathBuf>,
        /// Preamble space in abstract mode (default 2^40).
        #[arg(long)]
        preambles: Option<u64>,
        /// Adds the density-evolution loss prediction column.
        #[arg(long)]
        de_overlay: bool,
        /// Per-frame JSON-lines dump.
        #[arg(long)]
        frames_out: Option<PathBuf>,
    },
    /// Density-evolution curves and the load threshold.
    De {
        #[arg(long)]
        capture_table: Option<PathBuf>,
        /// Adds columns for the literal reading of the slot update.
        #[arg(long)]
        strict_paper_de: bool,
        /// Bisection width for the threshold.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Achievable-rate bounds over an alpha grid.
    Bounds {
        /// Collider counts for the collision bound.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        colliders: Vec<usize>,
        /// Detection probability `1 - P_md`.
        #[arg(long, default_value_t = 0.95)]
        p_detect: f64,
    },
    /// Calibrates the activity threshold for a target false-alarm rate.
    Calibrate {
        #[arg(long, default_value_t = 1e-3)]
        pfa: f64,
    },
    /// Estimates a capture table from slot-level physical-layer trials.
    CaptureTable {
        /// Detection trials used to measure the channel estimation error.
        #[arg(long, default_value_t = 50)]
        est_trials: usize,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => Failure::Config(c.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("ccra: invalid configuration: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("ccra: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => RunConfig::scaled(),
    };
    match common.seed {
        Some(s) => cfg.with(|f| f.master_seed = s).map_err(|e| Failure::Config(e.to_string())),
        None => Ok(cfg),
    }
}

fn sweep(common: &Common, default: &str) -> Result<SweepSpec, Failure> {
    SweepSpec::parse(common.sweep.as_deref().unwrap_or(default)).map_err(|e| Failure::Config(format!("--sweep: {e}")))
}

fn trials(common: &Common, default: usize) -> Result<usize, Failure> {
    match common.trials.unwrap_or(default) {
        0 => Err(Failure::Config("--trials must be at least 1".into())),
        t => Ok(t),
    }
}

fn capture_table(path: Option<&Path>, jmax: usize) -> Result<CaptureTable, Failure> {
    match path {
        Some(p) => output::read_capture_table(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display()))),
        None => Ok(CaptureTable::singleton_only(jmax)),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    if let Some(w) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let cfg = load_config(common)?;
    let sink = || output::open_sink(common.out.as_deref());
    match &cli.command {
        Command::PhySweep => {
            let sw = sweep(common, "alpha=0.01:0.1:1.0")?;
            let t = trials(common, 20)?;
            let extra = [("sweep", sw.to_string()), ("trials", t.to_string())];
            let header = ["param", "trials", "ser", "ser_ci_lo", "ser_ci_hi", "pmd", "pfa", "mean_solver_iters", "nonconverged"];
            let mut out = CsvOut::new(sink()?, "phy-sweep", &cfg, &extra, &header)?;
            for p in experiments::phy_sweep(&cfg, &sw, t)? {
                let (lo, hi) = p.ser.wilson95();
                out.row(&[
                    num(p.param),
                    p.trials.to_string(),
                    num(p.ser.rate()),
                    num(lo),
                    num(hi),
                    num(p.missed.rate()),
                    num(p.false_alarm.rate()),
                    num(p.mean_solver_iters),
                    p.nonconverged.to_string(),
                ])?;
            }
            out.finish()?;
        }
        Command::MacSim { mode, capture_table: table_path, preambles, de_overlay, frames_out } => {
            let sw = sweep(common, "load_G=0.1:0.1:1.0")?;
            let t = trials(common, 100)?;
            let table = capture_table(table_path.as_deref(), cfg.file.capture_jmax.max(16))?;
            let m = match mode {
                Mode::Abstract => MacMode::Abstract { capture: &table, num_preambles: preambles.unwrap_or(IDEAL_PREAMBLES) },
                Mode::FullPhy => MacMode::FullPhy,
            };
            let points = experiments::mac_sim(&cfg, &sw, t, &m, de_overlay.then_some(&table))?;
            let mode_name = if *mode == Mode::Abstract { "abstract" } else { "full-phy" };
            let extra = [("sweep", sw.to_string()), ("frames", t.to_string()), ("mode", mode_name.to_string())];
            let mut header = vec![
                "G", "active", "frames", "T", "T_stderr", "P_loss", "P_loss_ci_lo", "P_loss_ci_hi", "lost_preamble_collision",
                "lost_undetected", "lost_undecodable",
            ];
            if *de_overlay {
                header.push("P_loss_de");
            }
            let mut out = CsvOut::new(sink()?, "mac-sim", &cfg, &extra, &header)?;
            for p in &points {
                let s = &p.summary;
                let (lo, hi) = s.loss_wilson95();
                let mut row = vec![
                    num(p.load),
                    p.active.to_string(),
                    s.frames.to_string(),
                    num(s.throughput),
                    num(s.throughput_moments.std_error()),
                    num(s.loss_rate()),
                    num(lo),
                    num(hi),
                ];
                for c in [LossCause::PreambleCollision, LossCause::Undetected, LossCause::Undecodable] {
                    row.push(s.causes[c as usize].to_string());
                }
                if let Some(d) = p.de_loss {
                    row.push(num(d));
                }
                out.row(&row)?;
            }
            out.finish()?;
            if let Some(path) = frames_out {
                let mut w = BufWriter::new(File::create(path)?);
                for (i, p) in points.iter().enumerate() {
                    for (k, f) in p.frames.iter().enumerate() {
                        output::write_json_line(&mut w, &FrameLine::new(i, k, p.load, f))?;
                    }
                }
            }
        }
        Command::De { capture_table: table_path, strict_paper_de, tol } => {
            let sw = sweep(common, "load_G=0.05:0.05:1.2")?;
            let dist = DegreeDistribution::new(&cfg.system.config().degree_dist).map_err(|e| Failure::Config(e.to_string()))?;
            let table = capture_table(table_path.as_deref(), 200)?;
            let run = |conv| experiments::de_curve(&dist, &table, &sw.grid, conv).map_err(|e| Failure::Runtime(e.to_string()));
            let consistent = run(DeConvention::Consistent)?;
            let strict = if *strict_paper_de { Some(run(DeConvention::Literal)?) } else { None };
            let threshold = experiments::threshold(&dist, &table, *tol, DeConvention::Consistent)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            eprintln!("threshold G* = {threshold}");
            let extra = [("sweep", sw.to_string()), ("threshold", num(threshold))];
            let mut header = vec!["G", "P_D", "P_loss", "iterations", "converged"];
            if strict.is_some() {
                header.extend(["P_D_strict", "P_loss_strict"]);
            }
            let mut out = CsvOut::new(sink()?, "de", &cfg, &extra, &header)?;
            for (i, r) in consistent.iter().enumerate() {
                let mut row =
                    vec![num(r.load), num(r.p_decoded), num(r.p_loss), r.iterations.to_string(), r.converged.to_string()];
                if let Some(s) = &strict {
                    row.extend([num(s[i].p_decoded), num(s[i].p_loss)]);
                }
                out.row(&row)?;
            }
            out.finish()?;
        }
        Command::Bounds { colliders, p_detect } => {
            let sw = sweep(common, "alpha=0.0:0.05:1.0")?;
            let t = trials(common, 2000)?;
            let rows = experiments::bound_curves(&cfg, &sw.grid, colliders, *p_detect, t)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            let mut header = vec!["alpha".to_string(), "singleton".to_string()];
            header.extend(colliders.iter().map(|c| format!("collision_{c}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let extra = [("sweep", sw.to_string()), ("p_detect", num(*p_detect))];
            let mut out = CsvOut::new(sink()?, "bounds", &cfg, &extra, &header)?;
            for r in rows {
                let mut row = vec![num(r.alpha), num(r.singleton)];
                row.extend(r.collision.iter().map(|&v| num(v)));
                out.row(&row)?;
            }
            out.finish()?;
        }
        Command::Calibrate { pfa } => {
            let t = trials(common, 2000)?;
            let receiver = Receiver::new(cfg.system.clone(), cfg.receiver.clone());
            let seed = cfg.system.seed();
            let cal = calibrate_threshold(&receiver, *pfa, t, seed).map_err(|e| Failure::Runtime(e.to_string()))?;
            let rates = estimate_pmd_pfa(&receiver, cal.xi, t, seed).map_err(|e| Failure::Runtime(e.to_string()))?;
            let (lo, hi) = rates.missed.wilson95();
            let header = ["xi", "target_pfa", "samples", "trials", "pmd", "pmd_ci_lo", "pmd_ci_hi", "pfa", "mean_solver_iters"];
            let mut out = CsvOut::new(sink()?, "calibrate", &cfg, &[], &header)?;
            out.row(&[
                num(cal.xi),
                num(*pfa),
                cal.samples.to_string(),
                t.to_string(),
                num(rates.missed.rate()),
                num(lo),
                num(hi),
                num(rates.false_alarm.rate()),
                num(rates.mean_iterations),
            ])?;
            out.finish()?;
        }
        Command::CaptureTable { est_trials } => {
            let t = trials(common, 400)?;
            let receiver = Receiver::new(cfg.system.clone(), cfg.receiver.clone());
            let seed = cfg.system.seed().labeled("capture-table");
            let err = estimation_mse(&receiver, *est_trials, seed).map_err(|e| Failure::Runtime(e.to_string()))?;
            eprintln!("estimation error {} per subcarrier over {} detected users", err.mse, err.users);
            let opts = CaptureMcOptions { jmax: cfg.file.capture_jmax, trials: t, mode: cfg.phy.capture, est_error_var: err.mse };
            let (table, adjusted) = capture_table_from_phy(&cfg.system, &opts, seed).map_err(|e| Failure::Runtime(e.to_string()))?;
            if adjusted {
                eprintln!("capture table monotonized");
            }
            let mut s = sink()?;
            writeln_header(&mut s, &cfg)?;
            output::write_capture_table(&mut s, &table)?;
            s.flush()?;
        }
    }
    Ok(())
}

fn writeln_header(w: &mut dyn std::io::Write, cfg: &RunConfig) -> std::io::Result<()> {
    writeln!(w, "# ccra capture-table config_sha256={} master_seed={}", cfg.hash(), cfg.master_seed())
}
