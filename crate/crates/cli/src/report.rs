use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use qincompat_core::SolverOptions;
use serde::Serialize;

/// How a check compares `value` with `reference`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    AtMost,
    AtLeast,
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn close(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        let passed = (value - reference).abs() <= tolerance;
        Self { name: name.into(), value, reference, relation: Relation::Equal, tolerance, passed }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        let passed = value <= bound + tolerance;
        Self { name: name.into(), value, reference: bound, relation: Relation::AtMost, tolerance, passed }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        let passed = value >= bound - tolerance;
        Self { name: name.into(), value, reference: bound, relation: Relation::AtLeast, tolerance, passed }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self { name: name.into(), value: v, reference: 1.0, relation: Relation::Holds, tolerance: 0.0, passed: ok }
    }
}

/// Output of one command. Everything except `generated_at` is a function of
/// the command line.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub generated_at: u64,
    pub solver: SolverOptions,
    pub seed: Option<u64>,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub result: serde_json::Value,
}

impl Report {
    pub fn new(command: impl Into<String>, solver: SolverOptions, seed: Option<u64>, checks: Vec<Check>, result: serde_json::Value) -> Self {
        let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let passed = checks.iter().all(|c| c.passed);
        Self { command: command.into(), generated_at, solver, seed, passed, checks, result }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial report.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot create a file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.write_all(b"\n")?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
