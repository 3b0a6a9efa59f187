//! Result records and the files written by the CLI: `summary.json`, `metadata.json` and CSVs.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::Result;
use crate::integrator::SdePath;
use crate::montecarlo::{ErgodicityReport, RefinementTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    AtMost { limit: f64 },
    AtLeast { limit: f64 },
    Below { limit: f64 },
    Above { limit: f64 },
    Within { center: f64, tolerance: f64 },
    Between { lo: f64, hi: f64 },
    /// Boolean condition encoded as value 1 (holds) or 0.
    Holds,
}

impl Bound {
    pub fn accepts(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost { limit } => v <= limit,
            Bound::AtLeast { limit } => v >= limit,
            Bound::Below { limit } => v < limit,
            Bound::Above { limit } => v > limit,
            Bound::Within { center, tolerance } => (v - center).abs() <= tolerance,
            Bound::Between { lo, hi } => lo <= v && v <= hi,
            Bound::Holds => v == 1.0,
        }
    }
}

/// One asserted quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, bound: Bound) -> Self {
        Self { name: name.into(), value, passed: bound.accepts(value), bound }
    }

    pub fn flag(name: impl Into<String>, holds: bool) -> Self {
        Self::new(name, if holds { 1.0 } else { 0.0 }, Bound::Holds)
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, Bound::AtMost { limit })
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, Bound::AtLeast { limit })
    }

    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, Bound::Below { limit })
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, Bound::Above { limit })
    }

    pub fn within(name: impl Into<String>, value: f64, center: f64, tolerance: f64) -> Self {
        Self::new(name, value, Bound::Within { center, tolerance })
    }

    pub fn between(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(name, value, Bound::Between { lo, hi })
    }
}

/// Outcome of one acceptance criterion. Holds no timings, so it serializes identically
/// across runs with the same seed.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Supporting numbers (fractions, tables, fits).
    pub details: serde_json::Value,
}

impl CriterionResult {
    pub fn new(id: u32, title: impl Into<String>, checks: Vec<Check>, details: serde_json::Value) -> Self {
        let passed = !checks.is_empty() && checks.iter().all(|c| c.passed);
        Self { id, title: title.into(), passed, checks, details }
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("criterion {:>2} {verdict}  {}", self.id, self.title);
        for c in self.failed_checks() {
            s.push_str(&format!("\n    failed: {} = {} ({:?})", c.name, c.value, c.bound));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }
}

/// Run bookkeeping kept out of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub version: String,
    pub command: String,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub elapsed_seconds: Vec<(String, f64)>,
}

impl Metadata {
    pub fn start(command: impl Into<String>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            threads: rayon::current_num_threads(),
            started_unix: unix_now(),
            finished_unix: f64::NAN,
            elapsed_seconds: Vec::new(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = unix_now();
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

/// `t,x1,…,xd,path_id`, one row per recorded state.
pub fn write_paths_csv(path: &Path, paths: &[SdePath]) -> Result<()> {
    let d = paths.first().map_or(0, |p| p.final_state.len());
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.push("path_id".into());
    w.write_record(&header)?;
    for p in paths {
        for (t, x) in p.times.iter().zip(&p.states) {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            row.push(p.path_id.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,tv,d1,noise_floor`.
pub fn write_decay_csv(path: &Path, report: &ErgodicityReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "tv", "d1", "noise_floor"])?;
    for k in 0..report.checkpoints.len() {
        w.write_record([
            report.checkpoints[k].to_string(),
            report.tv[k].to_string(),
            report.d1[k].to_string(),
            report.noise_floor_d1[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `dt,mean_sup_error`.
pub fn write_refinement_csv(path: &Path, table: &RefinementTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["dt", "mean_sup_error"])?;
    for r in &table.rows {
        w.write_record([r.dt.to_string(), r.mean_sup_error.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
