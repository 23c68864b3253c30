//! The shipped experiments.
//!
//! Each scenario bundles knowledge documents, a scripted-model transcript, a
//! simulated lab and tolerances. [`run`] drives a bundle through the session
//! engine and returns a [`Report`] with per-cycle records and checks against
//! the lab's ground truth.

mod bundle;
mod fixtures;
mod lab;
pub mod lint;
pub mod rag;
mod report;
mod run;
mod scenario;

use thiserror::Error;

pub use bundle::{load_document, load_lab, load_manifest, EntryInput, Expected, Prepare, ScenarioBundle};
pub use fixtures::{fixture, fixtures_in};
pub use lab::ReseededLab;
pub use report::{
    Check, FitRow, LeakageRow, Outcome, PowerOutcome, PowerRow, QndOutcome, Report, ResonatorOutcome, SeriesRows,
};
pub use run::{build_report, run, scenario_engine, scenario_lab, ApproveAll, Approver, Run, RunOptions};
pub use scenario::{PowerSweepScenario, QndScenario, ResonatorScenario, Scenario, ScenarioRegistry};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    Unknown(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error(transparent)]
    Kb(#[from] hal_core::kb::KbError),
    #[error(transparent)]
    Model(#[from] hal_core::model::ModelError),
    #[error(transparent)]
    Engine(#[from] hal_core::engine::EngineError),
}

/// Run a registered scenario, approving every cycle.
pub fn run_named(name: &str, opts: &RunOptions) -> Result<Report, ScenarioError> {
    let registry = ScenarioRegistry::standard()?;
    let scenario = registry.get(name)?;
    Ok(run(scenario.as_ref(), opts, &mut ApproveAll)?.report)
}
