use hal_core::engine::{CycleRecord, Status};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub f_r: f64,
    pub q_i: f64,
    pub q_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorOutcome {
    /// Resonance counts reported by analysis cycles, in cycle order.
    pub found_counts: Vec<usize>,
    pub fits: Vec<FitRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRows {
    pub j: Vec<f64>,
    pub c_avg: Vec<f64>,
    pub n_samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageRow {
    pub a: f64,
    pub b: f64,
    pub l: f64,
    pub sigma_l: f64,
    pub j_min: f64,
    pub j_max: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QndOutcome {
    pub series: SeriesRows,
    pub fit: LeakageRow,
    pub dataset_path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub power: f64,
    pub visibility: f64,
    pub repeatability: f64,
    pub one_minus_l: f64,
    pub sigma_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerOutcome {
    pub table: Vec<PowerRow>,
    /// Plot-ready table with power, visibility, repeatability and leakage columns.
    pub dataset_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Resonator(ResonatorOutcome),
    Qnd(QndOutcome),
    PowerSweep(PowerOutcome),
    /// The run stopped before results could be read.
    Missing { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub cycles: Vec<CycleRecord>,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub passed: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn signals(&self) -> Vec<&str> {
        self.cycles.iter().filter_map(|c| c.signal_value.as_deref()).collect()
    }

    pub fn resonator(&self) -> Option<&ResonatorOutcome> {
        match &self.outcome {
            Outcome::Resonator(o) => Some(o),
            _ => None,
        }
    }

    pub fn qnd(&self) -> Option<&QndOutcome> {
        match &self.outcome {
            Outcome::Qnd(o) => Some(o),
            _ => None,
        }
    }

    pub fn power_sweep(&self) -> Option<&PowerOutcome> {
        match &self.outcome {
            Outcome::PowerSweep(o) => Some(o),
            _ => None,
        }
    }
}

/// Checks shared by every scenario: no engine error, no failed cycle, and the
/// expected number of cycles.
pub(crate) fn common_checks(history: &[CycleRecord], error: Option<&str>, cycles: Option<usize>) -> Vec<Check> {
    let mut out = vec![Check::new("completed", error.is_none(), error.unwrap_or("session finished"))];
    let failed: Vec<String> = history
        .iter()
        .filter(|r| r.status != Status::Executed)
        .map(|r| format!("cycle {} is {}: {}", r.index, r.status, r.signal_value.as_deref().unwrap_or("")))
        .collect();
    out.push(Check::new(
        "cycles_executed",
        failed.is_empty(),
        if failed.is_empty() { "every cycle executed".to_string() } else { failed.join("; ") },
    ));
    if let Some(n) = cycles {
        out.push(Check::new(
            "cycle_count",
            history.len() == n,
            format!("{} cycles, expected {n}", history.len()),
        ));
    }
    out
}
