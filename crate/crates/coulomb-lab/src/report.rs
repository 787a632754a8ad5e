//! Run reports. `report.json` is a pure function of config and seed; wall
//! clock times go to a separate `timings.json`.

use crate::error::{Error, Result};
use crate::study::ConvergenceTable;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    /// Recorded only.
    Info,
}

/// One asserted invariant. `id` is `<suite>/<invariant>`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn at_most(id: String, value: f64, bound: f64) -> Check {
        Check { id, value, bound, relation: Relation::AtMost, passed: value <= bound }
    }

    pub fn at_least(id: String, value: f64, bound: f64) -> Check {
        Check { id, value, bound, relation: Relation::AtLeast, passed: value >= bound }
    }

    pub fn info(id: String, value: f64) -> Check {
        Check { id, value, bound: f64::NAN, relation: Relation::Info, passed: true }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolverStats {
    pub solves: usize,
    pub max_iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    pub checks: Vec<Check>,
    pub tables: Vec<ConvergenceTable>,
    pub solver: SolverStats,
    /// Error that aborted the suite, with its stage tags.
    pub error: Option<String>,
    /// Extra artifacts `(file name, contents)` written next to the report.
    #[serde(skip)]
    pub files: Vec<(String, String)>,
}

impl SuiteReport {
    pub fn new(name: &str) -> SuiteReport {
        SuiteReport {
            name: name.to_string(),
            passed: true,
            skipped: false,
            checks: Vec::new(),
            tables: Vec::new(),
            solver: SolverStats::default(),
            error: None,
            files: Vec::new(),
        }
    }

    pub fn push(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    pub fn fail(&mut self, e: &Error) {
        self.passed = false;
        self.error = Some(e.to_string());
    }

    /// Identifiers of the failed checks (the suite name if it aborted).
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| c.id.clone()).collect();
        if self.error.is_some() {
            out.push(format!("{}/error", self.name));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: crate::config::RunConfig,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
    /// Command-specific payload (holonomy rows, decomposition summary).
    pub details: BTreeMap<String, serde_json::Value>,
}

impl RunReport {
    pub fn new(command: &str, config: &crate::config::RunConfig) -> RunReport {
        RunReport {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
            passed: true,
            suites: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, s: SuiteReport) {
        self.passed &= s.passed;
        self.suites.push(s);
    }

    pub fn failures(&self) -> Vec<String> {
        self.suites.iter().flat_map(|s| s.failures()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map(|s| s + "\n").map_err(|e| Error::Io(std::io::Error::other(e)))
    }

    /// Writes `report.json` and one CSV per convergence table.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        for s in &self.suites {
            for t in &s.tables {
                std::fs::write(dir.join(format!("{}__{}.csv", s.name, t.name)), t.to_csv()?)?;
            }
            for (name, text) in &s.files {
                std::fs::write(dir.join(name), text)?;
            }
        }
        Ok(())
    }
}

/// Wall-clock seconds per suite, kept out of the deterministic report.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub suites: BTreeMap<String, f64>,
}

impl Timings {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        std::fs::write(dir.join("timings.json"), text + "\n")?;
        Ok(())
    }
}
