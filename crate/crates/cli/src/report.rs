use std::fs;
use std::path::{Path, PathBuf};

use grouppdo::checks::{CheckResult, Command};
use grouppdo::plancherel::DiagnosticRecord;
use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::Config;

/// Normalization of the `𝔤*` lattice measure used by the exponential calculus.
pub const LATTICE_NORMALIZATION: &str = "dX = dy dx / (2 pi)^2";

#[derive(Serialize)]
pub struct CheckRecord {
    pub suite: String,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRecord {
    pub fn from_result(suite: Command, r: &CheckResult) -> Self {
        CheckRecord {
            suite: suite.name().into(),
            name: r.name.clone(),
            level: None,
            residual: Some(r.residual),
            tolerance: Some(r.tolerance),
            pass: r.pass,
            error: None,
        }
    }

    pub fn error(suite: Command, msg: &str) -> Self {
        CheckRecord {
            suite: suite.name().into(),
            name: "error".into(),
            level: None,
            residual: None,
            tolerance: None,
            pass: false,
            error: Some(msg.into()),
        }
    }

    pub fn at_level(mut self, level: usize) -> Self {
        self.level = Some(level);
        self
    }
}

#[derive(Serialize)]
pub struct TrajectoryPoint {
    pub suite: String,
    pub check: String,
    pub level: usize,
    pub nodes: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl TrajectoryPoint {
    pub fn new(suite: Command, r: &CheckResult, level: usize, nodes: usize) -> Self {
        TrajectoryPoint {
            suite: suite.name().into(),
            check: r.name.clone(),
            level,
            nodes,
            residual: r.residual,
            tolerance: r.tolerance,
            pass: r.pass,
        }
    }
}

#[derive(Serialize)]
pub struct SkippedSuite {
    pub suite: String,
    pub reason: String,
}

#[derive(Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: Box<RawValue>,
    pub seed: u64,
    pub lattice_normalization: &'static str,
    pub checks: Vec<CheckRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedSuite>,
    pub diagnostics: Vec<DiagnosticRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
    pub pass: bool,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn new(command: Command, config: &Config, seed: u64) -> Self {
        ExperimentReport {
            experiment: command.name().into(),
            config: config.raw.clone(),
            seed,
            lattice_normalization: LATTICE_NORMALIZATION,
            checks: Vec::new(),
            skipped: Vec::new(),
            diagnostics: Vec::new(),
            trajectory: None,
            pass: false,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn skip(&mut self, suite: Command, reason: String) {
        self.skipped.push(SkippedSuite {
            suite: suite.name().into(),
            reason,
        });
    }

    pub fn finish(&mut self, seconds: f64) {
        self.pass = !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
        self.wall_clock_seconds = seconds;
    }
}

/// Output directory; every file is written to a temporary name first and
/// renamed into place once complete.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, String> {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    pub fn write_with<E: std::fmt::Display>(
        &self,
        name: &str,
        write: impl FnOnce(&Path) -> Result<(), E>,
    ) -> Result<(), String> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        if let Err(e) = write(&tmp) {
            let _ = fs::remove_file(&tmp);
            return Err(format!("cannot write {}: {e}", target.display()));
        }
        fs::rename(&tmp, &target).map_err(|e| format!("cannot move {} into place: {e}", target.display()))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), String> {
        let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
        self.write_with(name, |p| fs::write(p, text))
    }
}

/// Residual-vs-level CSV: `suite,check,level,nodes,residual,tolerance,pass`.
pub fn write_trajectory_csv(path: &Path, points: &[TrajectoryPoint]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
