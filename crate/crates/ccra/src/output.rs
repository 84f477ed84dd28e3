//! CSV and JSON-lines emission, and the capture table file format.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ccra_core::analysis::CaptureTable;
use ccra_core::mac::{FrameResult, UserOutcome};
use serde::Serialize;

use crate::config::RunConfig;

pub type Sink = Box<dyn Write>;

/// Buffered file, or stdout when no path is given.
pub fn open_sink(path: Option<&Path>) -> io::Result<Sink> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// CSV writer whose first line is a comment carrying the config hash and
/// master seed.
pub struct CsvOut {
    w: csv::Writer<Sink>,
}

impl CsvOut {
    pub fn new(mut sink: Sink, command: &str, cfg: &RunConfig, extra: &[(&str, String)], header: &[&str]) -> io::Result<Self> {
        write!(sink, "# ccra {command} config_sha256={} master_seed={}", cfg.hash(), cfg.master_seed())?;
        for (k, v) in extra {
            write!(sink, " {k}={v}")?;
        }
        writeln!(sink)?;
        let mut w = csv::WriterBuilder::new().from_writer(sink);
        w.write_record(header)?;
        Ok(CsvOut { w })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        self.w.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.w.flush()
    }
}

/// Plain decimal rendering used for every float column.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Serialize)]
pub struct UserLine {
    pub preamble: u64,
    pub degree: usize,
    pub detected: bool,
    pub outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
}

/// One frame as a JSON object.
#[derive(Debug, Serialize)]
pub struct FrameLine {
    pub point: usize,
    pub trial: usize,
    pub param: f64,
    pub active: usize,
    pub detected: usize,
    pub decoded: usize,
    pub rounds: usize,
    pub throughput: f64,
    pub users: Vec<UserLine>,
}

impl FrameLine {
    pub fn new(point: usize, trial: usize, param: f64, f: &FrameResult) -> Self {
        let users = f
            .users
            .iter()
            .map(|u| {
                let (outcome, round, slot) = match u.outcome {
                    UserOutcome::Decoded { round, slot } => ("decoded", Some(round), Some(slot)),
                    UserOutcome::Lost(c) => (c.as_str(), None, None),
                };
                UserLine { preamble: u.preamble, degree: u.degree, detected: u.detected, outcome, round, slot }
            })
            .collect();
        FrameLine {
            point,
            trial,
            param,
            active: f.active(),
            detected: f.detected(),
            decoded: f.decoded(),
            rounds: f.rounds,
            throughput: f.throughput(),
            users,
        }
    }
}

pub fn write_json_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    writeln!(w)
}

#[derive(Debug, thiserror::Error)]
pub enum TableFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {0}: expected `j,t,probability`")]
    Syntax(usize),
    #[error("missing entry t={t} for j={j}")]
    Missing { t: usize, j: usize },
    #[error("{0}")]
    Table(String),
}

/// Writes `j,t,probability` rows after a `j,t,p` header.
pub fn write_capture_table<W: Write>(mut w: W, table: &CaptureTable) -> io::Result<()> {
    writeln!(w, "j,t,p")?;
    for (j1, row) in table.rows().iter().enumerate() {
        for (t, p) in row.iter().enumerate() {
            writeln!(w, "{},{},{}", j1 + 1, t, num(*p))?;
        }
    }
    Ok(())
}

/// Reads the format of [`write_capture_table`]; `#` lines and the header
/// are skipped. The table is re-monotonized on load.
pub fn read_capture_table(path: &Path) -> Result<CaptureTable, TableFileError> {
    let r = BufReader::new(File::open(path)?);
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('j') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (f.len() == 3)
            .then(|| Some((f[0].parse().ok()?, f[1].parse().ok()?, f[2].parse().ok()?)))
            .flatten()
            .ok_or(TableFileError::Syntax(i + 1))?;
        entries.push(parsed);
    }
    let jmax = entries.iter().map(|e| e.0).max().unwrap_or(0);
    let mut rows: Vec<Vec<Option<f64>>> = (1..=jmax).map(|j| vec![None; j]).collect();
    for (j, t, p) in entries {
        if j == 0 || t >= j {
            return Err(TableFileError::Table(format!("entry t={t}, j={j} out of range")));
        }
        rows[j - 1][t] = Some(p);
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(j1, row)| {
            row.into_iter()
                .enumerate()
                .map(|(t, p)| p.ok_or(TableFileError::Missing { t, j: j1 + 1 }))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    CaptureTable::from_rows(rows, None).map(|(t, _)| t).map_err(|e| TableFileError::Table(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_comment_then_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.csv");
        let cfg = RunConfig::scaled();
        let mut out = CsvOut::new(open_sink(Some(&path)).unwrap(), "test", &cfg, &[], &["a", "b"]).unwrap();
        out.row(&[num(0.5), num(1.0)]).unwrap();
        out.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# ccra test config_sha256="));
        assert!(lines[0].contains(&cfg.hash()));
        assert_eq!(&lines[1..], &["a,b", "0.5,1"]);
    }

    #[test]
    fn capture_table_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let table = CaptureTable::from_fn(3, |t, j| (t + 1) as f64 / j as f64);
        write_capture_table(File::create(&path).unwrap(), &table).unwrap();
        assert_eq!(read_capture_table(&path).unwrap(), table);
        std::fs::write(&path, "j,t,p\n2,0,0.5\n").unwrap();
        assert!(matches!(read_capture_table(&path), Err(TableFileError::Missing { .. })));
    }
}
