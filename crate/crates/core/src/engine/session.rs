use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use hal_runtime::Environment;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::events::{Event, EventKind, EventLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Auto,
    Manual,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "auto" => Some(Mode::Auto),
            "manual" => Some(Mode::Manual),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Auto => "auto",
            Mode::Manual => "manual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Planned,
    Developed,
    PendingApproval,
    Executed,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Planned => "planned",
            Status::Developed => "developed",
            Status::PendingApproval => "pending_approval",
            Status::Executed => "executed",
            Status::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Option<Status> {
        [
            Status::Planned,
            Status::Developed,
            Status::PendingApproval,
            Status::Executed,
            Status::Failed,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One plan/develop/execute cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub index: usize,
    pub user_input: Option<String>,
    pub prompt: String,
    pub signal_description: String,
    pub script_source: String,
    pub signal_value: Option<String>,
    pub status: Status,
    /// Developer re-prompts needed to get a valid script.
    pub retries: usize,
}

pub struct Session {
    pub id: String,
    pub mode: Mode,
    pub history: Vec<CycleRecord>,
    pub done: bool,
    pub env: Environment,
    pub(crate) inbox: VecDeque<String>,
    events: Arc<EventLog>,
}

impl Session {
    pub fn new(id: impl Into<String>, mode: Mode, env: Environment, events: Arc<EventLog>) -> Self {
        Self {
            id: id.into(),
            mode,
            history: Vec::new(),
            done: false,
            env,
            inbox: VecDeque::new(),
            events,
        }
    }

    pub fn events(&self) -> &Arc<EventLog> {
        &self.events
    }

    /// Queue user text for the next cycle that runs.
    pub fn post_input(&mut self, text: impl Into<String>) {
        self.inbox.push_back(text.into());
    }

    pub fn queued_inputs(&self) -> usize {
        self.inbox.len()
    }

    /// Index of the cycle waiting for approval, if any.
    pub fn pending(&self) -> Option<usize> {
        self.history
            .iter()
            .find(|r| r.status == Status::PendingApproval)
            .map(|r| r.index)
    }

    pub fn record(&self, index: usize) -> Option<&CycleRecord> {
        index.checked_sub(1).and_then(|i| self.history.get(i))
    }

    pub(crate) fn record_mut(&mut self, index: usize) -> Option<&mut CycleRecord> {
        index.checked_sub(1).and_then(|i| self.history.get_mut(i))
    }

    pub(crate) fn emit(&self, kind: EventKind, payload: Json) -> u64 {
        self.events.append(kind, payload)
    }
}

pub(crate) fn plan_payload(r: &CycleRecord) -> Json {
    json!({
        "cycle": r.index,
        "user_input": r.user_input,
        "prompt": r.prompt,
        "signal_description": r.signal_description,
    })
}

pub(crate) fn code_payload(r: &CycleRecord) -> Json {
    json!({
        "cycle": r.index,
        "source": r.script_source,
        "retries": r.retries,
        "status": r.status.as_str(),
    })
}

/// Compact text of the session so far, given to the planner. Prompts,
/// expected signals and observed signals are always kept; scripts older than
/// the last `full_scripts` cycles shrink to one line.
pub fn digest(history: &[CycleRecord], full_scripts: usize) -> String {
    let cutoff = history.len().saturating_sub(full_scripts);
    let mut out = String::new();
    for (i, r) in history.iter().enumerate() {
        out.push_str(&format!("Cycle {} [{}]\n", r.index, r.status));
        if let Some(input) = &r.user_input {
            out.push_str(&format!("User input: {input}\n"));
        }
        out.push_str(&format!("Prompt: {}\n", r.prompt));
        out.push_str(&format!("Expected signal: {}\n", r.signal_description));
        if !r.script_source.is_empty() {
            if i >= cutoff {
                out.push_str("Script:\n");
                for line in r.script_source.lines() {
                    out.push_str(&format!("    {line}\n"));
                }
            } else {
                out.push_str(&format!(
                    "Script: {} lines, re-run with invoke(\"step-{}\")\n",
                    r.script_source.lines().count(),
                    r.index
                ));
            }
        }
        if let Some(v) = &r.signal_value {
            out.push_str(&format!("Signal: {v}\n"));
        }
        out.push('\n');
    }
    out
}

/// Rebuild cycle records from an event log.
pub fn replay(events: &[Event]) -> Result<Vec<CycleRecord>, String> {
    let mut history: Vec<CycleRecord> = Vec::new();
    for e in events {
        let cycle = e.payload.get("cycle").and_then(Json::as_u64).map(|c| c as usize);
        let text = |key: &str| -> Result<String, String> {
            e.payload
                .get(key)
                .and_then(Json::as_str)
                .map(str::to_string)
                .ok_or_else(|| format!("event {} lacks {key}", e.seq))
        };
        match e.kind {
            EventKind::Plan => {
                let index = cycle.ok_or_else(|| format!("event {} lacks cycle", e.seq))?;
                if index != history.len() + 1 {
                    return Err(format!("plan event {} for cycle {index} out of order", e.seq));
                }
                history.push(CycleRecord {
                    index,
                    user_input: e.payload.get("user_input").and_then(Json::as_str).map(str::to_string),
                    prompt: text("prompt")?,
                    signal_description: text("signal_description")?,
                    script_source: String::new(),
                    signal_value: None,
                    status: Status::Planned,
                    retries: 0,
                });
            }
            EventKind::Code => {
                let source = text("source")?;
                let status = Status::parse(&text("status")?).ok_or_else(|| format!("event {} bad status", e.seq))?;
                let retries = e.payload.get("retries").and_then(Json::as_u64).unwrap_or(0) as usize;
                let r = at(&mut history, cycle, e.seq)?;
                r.script_source = source;
                r.status = status;
                r.retries = retries;
            }
            EventKind::Signal | EventKind::Error if cycle.is_some() => {
                let value = text("value")?;
                let r = at(&mut history, cycle, e.seq)?;
                r.signal_value = Some(value);
                r.status = if e.kind == EventKind::Signal {
                    Status::Executed
                } else {
                    Status::Failed
                };
            }
            _ => {}
        }
    }
    Ok(history)
}

fn at(history: &mut [CycleRecord], cycle: Option<usize>, seq: u64) -> Result<&mut CycleRecord, String> {
    let c = cycle.ok_or_else(|| format!("event {seq} lacks cycle"))?;
    history
        .get_mut(c.wrapping_sub(1))
        .ok_or_else(|| format!("event {seq} refers to unknown cycle {c}"))
}
