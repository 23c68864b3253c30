use std::path::PathBuf;
use std::sync::Arc;

use hal_core::engine::{CycleRecord, Engine, EngineError, Mode, Session};
use hal_core::events::{EventLog, LogicalClock};
use hal_runtime::Host;
use hal_virtlab::{Lab, LocalLab, Storage};
use serde_json::Value as Json;

use crate::lab::ReseededLab;
use crate::report::{common_checks, Outcome, Report};
use crate::scenario::Scenario;
use crate::ScenarioError;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub mode: Mode,
    /// Storage root for datasets written during the run.
    pub data_dir: PathBuf,
}

/// Decides whether a cycle held in manual mode may run.
pub trait Approver {
    fn approve(&mut self, record: &CycleRecord) -> bool;
}

pub struct ApproveAll;

impl Approver for ApproveAll {
    fn approve(&mut self, _: &CycleRecord) -> bool {
        true
    }
}

pub struct Run {
    pub report: Report,
    pub events: Arc<EventLog>,
    pub session: Session,
}

/// The scenario's lab with the run seed mixed into every request.
pub fn scenario_lab(scenario: &dyn Scenario, seed: u64) -> Result<Arc<dyn Lab>, ScenarioError> {
    let local = LocalLab::new(scenario.bundle().lab_config.clone()).map_err(|e| ScenarioError::Fixture(e.to_string()))?;
    Ok(Arc::new(ReseededLab::new(Arc::new(local), seed)))
}

/// Engine over the bundle's knowledge and transcript, with any knowledge
/// preparation already done.
pub fn scenario_engine(scenario: &dyn Scenario) -> Result<Engine, ScenarioError> {
    let bundle = scenario.bundle();
    let engine = Engine::new(bundle.knowledge_base()?, Arc::new(bundle.model()?));
    if let Some(p) = &bundle.prepare {
        engine.prepare_knowledge(&p.instructions, &p.prompt)?;
    }
    Ok(engine)
}

/// Run every cycle of a scenario, delivering entry inputs at their cycles.
pub fn run(scenario: &dyn Scenario, opts: &RunOptions, approver: &mut dyn Approver) -> Result<Run, ScenarioError> {
    let bundle = scenario.bundle();
    let engine = scenario_engine(scenario)?;
    let storage = Storage::new(&opts.data_dir);
    let host = Host {
        lab: Some(scenario_lab(scenario, opts.seed)?),
        storage: Some(storage.clone()),
        ..Host::default()
    };
    let events = Arc::new(EventLog::new(Arc::new(LogicalClock::default())));
    let mut session = engine.new_session(bundle.name.clone(), opts.mode, host, Arc::clone(&events));
    scenario.prime(&engine, &mut session)?;

    let mut pending_inputs: Vec<_> = bundle.entry_inputs.iter().collect();
    let mut error = None;
    loop {
        let next = session.history.len() + 1;
        let input = pending_inputs
            .iter()
            .position(|i| i.cycle <= next)
            .map(|at| pending_inputs.remove(at).text.as_str());
        match engine.run_cycle(&mut session, input) {
            Ok(report) => {
                if let Some(index) = session.pending() {
                    let record = session.record(index).expect("pending cycle exists").clone();
                    if !approver.approve(&record) {
                        error = Some(format!("cycle {index} was not approved"));
                        break;
                    }
                    engine.approve(&mut session, index)?;
                }
                if report.done && pending_inputs.is_empty() {
                    break;
                }
            }
            Err(EngineError::SessionDone) if pending_inputs.is_empty() => break,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let report = build_report(
        scenario,
        opts.seed,
        &session.history,
        &session.env.state_json(),
        Some(&storage),
        error,
    );
    Ok(Run { report, events, session })
}

/// A report from a finished session, however it was driven.
pub fn build_report(
    scenario: &dyn Scenario,
    seed: u64,
    history: &[CycleRecord],
    state: &Json,
    storage: Option<&Storage>,
    error: Option<String>,
) -> Report {
    let outcome = scenario
        .outcome(history, state, storage)
        .unwrap_or_else(|reason| Outcome::Missing { reason });
    let mut checks = common_checks(history, error.as_deref(), scenario.bundle().expected.cycles);
    checks.extend(scenario.checks(&outcome));
    Report {
        scenario: scenario.name().to_string(),
        seed,
        cycles: history.to_vec(),
        passed: checks.iter().all(|c| c.passed),
        outcome,
        checks,
        error,
    }
}
