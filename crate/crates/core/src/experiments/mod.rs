//! Experiment runners producing machine-readable reports.
//!
//! Each runner takes a resolved config, performs its pipeline with pinned
//! seeds, and returns a [`RunReport`] (JSON) plus a [`CurveTable`] (CSV) for
//! plotting. Reports embed the exact resolved config and the outcome of
//! every asserted check; a run passes iff all checks pass.

pub mod damage;
pub mod microsphere;
pub mod poisson;
pub mod rubber;
pub mod steelbar;
pub mod yield_surface;

pub use damage::{run_damage, DamageConfig};
pub use microsphere::{run_microsphere, MicrosphereConfig};
pub use poisson::{run_poisson, PoissonConfig};
pub use rubber::{run_rubber, RubberConfig};
pub use steelbar::{run_steelbar, SteelbarConfig};
pub use yield_surface::{run_yield, YieldConfig};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rb::ImprovementReport;

/// Environment variable capping worker parallelism for a run.
pub const THREADS_ENV: &str = "RBX_THREADS";

/// Thread pool honoring `RBX_THREADS`. Parallelism only distributes
/// independent seeds/variants, each deterministic on its own, so results do
/// not depend on the thread count.
pub fn worker_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
    {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool")
}

/// Outcome of one asserted property within a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Per-seed slice of a run: named scalar metrics plus any conditional
/// averaging measurements performed under that seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub improvements: Vec<ImprovementReport>,
}

impl SeedReport {
    pub fn new(seed: u64) -> Self {
        SeedReport {
            seed,
            metrics: BTreeMap::new(),
            improvements: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }
}

/// Full machine-readable record of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    /// Exact resolved configuration (no hidden defaults).
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedReport>,
    /// Cross-seed aggregates, including the best-seed selection where the
    /// pipeline calls for one.
    pub aggregate: BTreeMap<String, f64>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn failed_checks(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Tabular side output designed for direct plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CurveTable {
    pub fn new(columns: &[&str]) -> Self {
        CurveTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Report plus plotting table returned by every runner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub report: RunReport,
    pub curves: CurveTable,
}

pub(crate) struct RunAssembler {
    experiment: &'static str,
    config: serde_json::Value,
    seeds: Vec<u64>,
    per_seed: Vec<SeedReport>,
    aggregate: BTreeMap<String, f64>,
    checks: Vec<CheckResult>,
    started: Instant,
}

impl RunAssembler {
    pub fn new<C: Serialize>(experiment: &'static str, config: &C, seeds: Vec<u64>) -> Self {
        RunAssembler {
            experiment,
            config: serde_json::to_value(config).expect("serializable config"),
            seeds,
            per_seed: Vec::new(),
            aggregate: BTreeMap::new(),
            checks: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn push_seed(&mut self, report: SeedReport) {
        self.per_seed.push(report);
    }

    pub fn aggregate(&mut self, name: &str, value: f64) {
        self.aggregate.insert(name.to_string(), value);
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult::new(name, passed, detail));
    }

    pub fn finish(self, curves: CurveTable) -> RunOutput {
        let passed = self.checks.iter().all(|c| c.passed);
        RunOutput {
            report: RunReport {
                experiment: self.experiment.to_string(),
                config: self.config,
                seeds: self.seeds,
                per_seed: self.per_seed,
                aggregate: self.aggregate,
                checks: self.checks,
                passed,
                wall_time_s: self.started.elapsed().as_secs_f64(),
            },
            curves,
        }
    }
}

/// Mean of a slice.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation of a slice.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}
