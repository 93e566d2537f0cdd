//! Verification reports: `report.json`, `summary.txt` and CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;

pub const SCHEMA: &str = "vcslab-report/1";
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Bound {
    AtMost {
        limit: f64,
    },
    AtLeast {
        limit: f64,
    },
    Within {
        lo: f64,
        hi: f64,
    },
    /// Recorded for information, always passes.
    Reported,
}

impl Bound {
    pub fn admits(&self, x: f64) -> bool {
        match *self {
            Self::AtMost { limit } => x <= limit,
            Self::AtLeast { limit } => x >= limit,
            Self::Within { lo, hi } => (lo..=hi).contains(&x),
            Self::Reported => true,
        }
    }

    fn describe(&self) -> String {
        match *self {
            Self::AtMost { limit } => format!("<= {limit:e}"),
            Self::AtLeast { limit } => format!(">= {limit:e}"),
            Self::Within { lo, hi } => format!("in [{lo}, {hi}]"),
            Self::Reported => "reported".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub passed: bool,
    pub anchor: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema: &'static str,
    pub library_version: &'static str,
    pub name: String,
    pub anchor: String,
    pub kind: &'static str,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub checks: Vec<CheckRecord>,
    /// Set when the experiment aborted with a library error.
    pub error: Option<String>,
    pub tables: Vec<String>,
    pub passed: bool,
    pub wall_time_s: f64,
}

/// Collects check records and CSV tables while an experiment runs.
#[derive(Debug, Default)]
pub struct Recorder {
    pub checks: Vec<CheckRecord>,
    pub tables: Vec<(String, String)>,
}

impl Recorder {
    pub fn check(&mut self, name: impl Into<String>, value: f64, bound: Bound, anchor: impl Into<String>) {
        let passed = value.is_finite() && bound.admits(value) || matches!(bound, Bound::Reported);
        self.checks.push(CheckRecord {
            name: name.into(),
            value,
            bound,
            passed,
            anchor: anchor.into(),
        });
    }

    pub fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64, anchor: impl Into<String>) {
        self.check(name, value, Bound::AtMost { limit }, anchor);
    }

    pub fn report(&mut self, name: impl Into<String>, value: f64, anchor: impl Into<String>) {
        self.check(name, value, Bound::Reported, anchor);
    }

    pub fn table(&mut self, file: impl Into<String>, contents: String) {
        self.tables.push((file.into(), contents));
    }
}

impl VerificationReport {
    pub fn new(cfg: &ExperimentConfig, rec: &Recorder, error: Option<String>, wall_time_s: f64) -> Self {
        let passed = error.is_none() && rec.checks.iter().all(|c| c.passed);
        Self {
            schema: SCHEMA,
            library_version: LIBRARY_VERSION,
            name: cfg.name.clone(),
            anchor: cfg.anchor.clone(),
            kind: cfg.experiment.kind(),
            seed: cfg.seed,
            config: cfg.clone(),
            checks: rec.checks.clone(),
            error,
            tables: rec.tables.iter().map(|(n, _)| n.clone()).collect(),
            passed,
            wall_time_s,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} ({})", self.name, self.kind);
        let _ = writeln!(s, "anchor: {}", self.anchor);
        let _ = writeln!(s, "seed: {}  library: {}", self.seed, self.library_version);
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(s, "{:<width$}  {:>12}  {:<24}  status", "check", "value", "bound");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<width$}  {:>12.4e}  {:<24}  {}",
                c.name,
                c.value,
                c.bound.describe(),
                if c.passed { "pass" } else { "FAIL" }
            );
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        let _ = writeln!(s, "overall: {}", if self.passed { "PASS" } else { "FAIL" });
        s
    }

    pub fn write(&self, dir: &Path, rec: &Recorder) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json() + "\n")?;
        fs::write(dir.join("summary.txt"), self.summary())?;
        for (name, contents) in &rec.tables {
            fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}
