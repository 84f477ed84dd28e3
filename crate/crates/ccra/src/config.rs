//! Configuration files, their canonical hash and sweep grids.

use std::fmt;
use std::path::Path;

use ccra_core::model::ControlBand;
use ccra_core::phy::CaptureMode;
use ccra_core::{CheckedConfig, ConfigError, Modulation, SystemConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::frame::{PhyOptions, ResidualKind};
use crate::recovery::{OperatorKind, ReceiverConfig, SolverKind};

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {msg}")]
    Value { field: &'static str, msg: String },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

fn bad(field: &'static str, msg: impl Into<String>) -> ConfigFileError {
    ConfigFileError::Value { field, msg: msg.into() }
}

/// `control_band` accepts explicit indices, `"centered:m"` or `"random:m"`,
/// either bare or as a one-element array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandSpec {
    Indices(Vec<usize>),
    Named(String),
    NamedList(Vec<String>),
}

/// The on-disk format. Field names follow [`SystemConfig`]; everything
/// after `degree_dist` configures the receiver and the simulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub n: usize,
    pub control_band: BandSpec,
    pub s_cp: usize,
    pub s_d: usize,
    pub k1: usize,
    #[serde(rename = "U")]
    pub num_users: usize,
    pub k2: usize,
    pub alpha: f64,
    pub noise_var: f64,
    /// Overrides `noise_var` when present.
    pub snr_db: Option<f64>,
    pub num_data_slots: usize,
    pub modulation: String,
    pub master_seed: u64,
    pub degree_dist: Vec<(usize, f64)>,

    pub solver: String,
    pub operator: String,
    pub xi: f64,
    pub epsilon: Option<f64>,
    pub max_iter: usize,
    /// `"genie-crc"` or `"sinr"`.
    pub capture: String,
    pub capture_sinr_db: f64,
    /// `"genie"` or `"proxy"`.
    pub residual: String,
    pub rip_delta: f64,
    /// Largest slot degree tabulated for physical-layer capture tables.
    pub capture_jmax: usize,
}

impl Default for FileConfig {
    fn default() -> Self {
        let s = SystemConfig::scaled();
        let rx = ReceiverConfig::default();
        FileConfig {
            n: s.n,
            control_band: BandSpec::Named(band_name(&s.control_band)),
            s_cp: s.s_cp,
            s_d: s.s_d,
            k1: s.k1,
            num_users: s.num_users,
            k2: s.k2,
            alpha: s.alpha,
            noise_var: s.noise_var,
            snr_db: None,
            num_data_slots: s.num_data_slots,
            modulation: "bpsk".into(),
            master_seed: s.master_seed,
            degree_dist: s.degree_dist,
            solver: rx.solver.name().into(),
            operator: "auto".into(),
            xi: rx.xi,
            epsilon: None,
            max_iter: rx.greedy.max_iter,
            capture: "sinr".into(),
            capture_sinr_db: crate::frame::DEFAULT_CAPTURE_DB,
            residual: "genie".into(),
            rip_delta: 0.1,
            capture_jmax: 6,
        }
    }
}

fn band_name(b: &ControlBand) -> String {
    match b {
        ControlBand::Centered(m) => format!("centered:{m}"),
        ControlBand::Random(m) => format!("random:{m}"),
        ControlBand::Explicit(v) => format!("{v:?}"),
    }
}

fn parse_band(spec: &BandSpec) -> Result<ControlBand, ConfigFileError> {
    let named = |s: &str| -> Result<ControlBand, ConfigFileError> {
        let (kind, m) = s.split_once(':').ok_or_else(|| bad("control_band", format!("expected KIND:m, got {s:?}")))?;
        let m: usize = m.trim().parse().map_err(|_| bad("control_band", format!("bad size in {s:?}")))?;
        match kind.trim() {
            "centered" => Ok(ControlBand::Centered(m)),
            "random" => Ok(ControlBand::Random(m)),
            k => Err(bad("control_band", format!("unknown band kind {k:?}"))),
        }
    };
    match spec {
        BandSpec::Indices(v) => Ok(ControlBand::Explicit(v.clone())),
        BandSpec::Named(s) => named(s),
        BandSpec::NamedList(v) if v.len() == 1 => named(&v[0]),
        BandSpec::NamedList(_) => Err(bad("control_band", "expected one \"KIND:m\" entry")),
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: FileConfig,
    pub system: CheckedConfig,
    pub receiver: ReceiverConfig,
    pub phy: PhyOptions,
}

impl RunConfig {
    pub fn from_file_config(mut file: FileConfig) -> Result<Self, ConfigFileError> {
        let modulation = match file.modulation.to_ascii_lowercase().as_str() {
            "bpsk" => Modulation::Bpsk,
            "qpsk" => Modulation::Qpsk,
            m => return Err(bad("modulation", format!("unknown modulation {m:?}"))),
        };
        let mut sys = SystemConfig {
            n: file.n,
            control_band: parse_band(&file.control_band)?,
            s_cp: file.s_cp,
            s_d: file.s_d,
            k1: file.k1,
            num_users: file.num_users,
            k2: file.k2,
            alpha: file.alpha,
            noise_var: file.noise_var,
            num_data_slots: file.num_data_slots,
            modulation,
            master_seed: file.master_seed,
            degree_dist: file.degree_dist.clone(),
        };
        if let Some(db) = file.snr_db.take() {
            if !db.is_finite() {
                return Err(bad("snr_db", "must be finite"));
            }
            sys.set_snr_db(db);
            file.noise_var = sys.noise_var;
        }
        let system = CheckedConfig::new(sys)?;

        let mut receiver = ReceiverConfig {
            solver: SolverKind::parse(&file.solver).ok_or_else(|| bad("solver", format!("unknown solver {:?}", file.solver)))?,
            operator: match file.operator.as_str() {
                "auto" => OperatorKind::Auto,
                "fft" => OperatorKind::Fft,
                "direct" => OperatorKind::Direct,
                o => return Err(bad("operator", format!("unknown operator {o:?}"))),
            },
            xi: file.xi,
            epsilon: file.epsilon,
            ..ReceiverConfig::default()
        };
        if !(file.xi >= 0.0) {
            return Err(bad("xi", "must be nonnegative"));
        }
        if file.max_iter == 0 {
            return Err(bad("max_iter", "must be positive"));
        }
        receiver.greedy.max_iter = file.max_iter;
        let capture = match file.capture.as_str() {
            "genie-crc" => CaptureMode::GenieCrc,
            "sinr" => CaptureMode::sinr_db(file.capture_sinr_db),
            c => return Err(bad("capture", format!("unknown capture mode {c:?}"))),
        };
        let residual = match file.residual.as_str() {
            "genie" => ResidualKind::Genie,
            "proxy" => ResidualKind::Proxy { delta: file.rip_delta },
            r => return Err(bad("residual", format!("unknown residual model {r:?}"))),
        };
        if file.capture_jmax == 0 {
            return Err(bad("capture_jmax", "must be positive"));
        }
        Ok(RunConfig { file, system, receiver, phy: PhyOptions { capture, residual } })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigFileError> {
        Self::from_file_config(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigFileError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn scaled() -> Self {
        Self::from_file_config(FileConfig::default()).expect("default config is valid")
    }

    /// SHA-256 of the canonical JSON form of the resolved file config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.file).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn master_seed(&self) -> u64 {
        self.file.master_seed
    }

    /// Copy with one field changed through the file representation, so the
    /// hash and validation see the change.
    pub fn with(&self, f: impl FnOnce(&mut FileConfig)) -> Result<Self, ConfigFileError> {
        let mut file = self.file.clone();
        f(&mut file);
        Self::from_file_config(file)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    ActiveUsers,
    LoadG,
    SnrDb,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::ActiveUsers => "active_users",
            SweepParam::LoadG => "load_G",
            SweepParam::SnrDb => "snr_db",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "alpha" => SweepParam::Alpha,
            "active_users" | "k2" => SweepParam::ActiveUsers,
            "load_G" | "G" => SweepParam::LoadG,
            "snr_db" => SweepParam::SnrDb,
            _ => return None,
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SweepError {
    #[error("expected NAME=GRID, got {0:?}")]
    Syntax(String),
    #[error("unknown sweep parameter {0:?}")]
    Param(String),
    #[error("bad number {0:?}")]
    Number(String),
    #[error("empty grid")]
    Empty,
    #[error("step must be positive")]
    Step,
}

/// A parameter and the grid of values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub grid: Vec<f64>,
}

impl SweepSpec {
    /// `NAME=START:STEP:STOP` or `NAME=v1,v2,...`. A range includes `STOP`
    /// even when it is off the step lattice.
    pub fn parse(s: &str) -> Result<Self, SweepError> {
        let (name, grid) = s.split_once('=').ok_or_else(|| SweepError::Syntax(s.into()))?;
        let param = SweepParam::parse(name.trim()).ok_or_else(|| SweepError::Param(name.into()))?;
        let num = |v: &str| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| SweepError::Number(v.into()));
        let grid = if grid.contains(':') {
            let parts: Vec<&str> = grid.split(':').collect();
            if parts.len() != 3 {
                return Err(SweepError::Syntax(s.into()));
            }
            let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if step <= 0.0 {
                return Err(SweepError::Step);
            }
            if stop < start {
                return Err(SweepError::Empty);
            }
            range(start, step, stop)
        } else {
            grid.split(',').filter(|v| !v.trim().is_empty()).map(num).collect::<Result<_, _>>()?
        };
        if grid.is_empty() {
            return Err(SweepError::Empty);
        }
        Ok(SweepSpec { param, grid })
    }

    /// Applies grid value `v` to a config. Load is turned into an active
    /// user count through the number of slots.
    pub fn apply(&self, cfg: &RunConfig, v: f64) -> Result<RunConfig, ConfigFileError> {
        match self.param {
            SweepParam::Alpha => cfg.with(|f| f.alpha = v),
            SweepParam::SnrDb => cfg.with(|f| f.snr_db = Some(v)),
            SweepParam::ActiveUsers => cfg.with(|f| f.k2 = v.round().max(0.0) as usize),
            SweepParam::LoadG => cfg.with(|f| f.k2 = (v * f.num_data_slots as f64).round().max(0.0) as usize),
        }
    }
}

impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.grid.iter().map(|v| v.to_string()).collect();
        write!(f, "{}={}", self.param.name(), vals.join(","))
    }
}

fn range(start: f64, step: f64, stop: f64) -> Vec<f64> {
    let tol = 1e-9 * step;
    let count = ((stop - start + tol) / step).floor() as usize + 1;
    // Rounded so that 0.01 + 3 * 0.1 prints as 0.31.
    let clean = |x: f64| (x * 1e12).round() / 1e12;
    let mut grid: Vec<f64> = (0..count).map(|i| clean(start + i as f64 * step)).collect();
    if let Some(&last) = grid.last() {
        if stop - last > tol {
            grid.push(clean(stop));
        }
    }
    grid
}
