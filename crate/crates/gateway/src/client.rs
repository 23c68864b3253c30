use std::thread;
use std::time::{Duration, Instant};

use hal_core::engine::{replay, CycleRecord};
use hal_core::events::Event;
use hal_scenarios::{build_report, Report, Scenario};
use hal_virtlab::Storage;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::Snapshot;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{status} {code}: {message}")]
    Api { status: u16, code: String, message: String },
    #[error(transparent)]
    Http(#[from] reqwest::Error),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("bad event log: {0}")]
    Replay(String),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            Self::Api { status, .. } => Some(*status),
            _ => None,
        }
    }
}

#[derive(Deserialize)]
struct Events {
    events: Vec<Event>,
}

/// Blocking client for the gateway API.
pub struct GatewayClient {
    base: String,
    http: reqwest::blocking::Client,
}

impl GatewayClient {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::blocking::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn send(&self, req: reqwest::blocking::RequestBuilder) -> Result<Value, ClientError> {
        let resp = req.send()?;
        let status = resp.status();
        let body: Value = resp.json()?;
        if status.is_success() {
            return Ok(body);
        }
        let err = &body["error"];
        Err(ClientError::Api {
            status: status.as_u16(),
            code: err["code"].as_str().unwrap_or("").to_string(),
            message: err["message"].as_str().unwrap_or("").to_string(),
        })
    }

    pub fn get(&self, path: &str) -> Result<Value, ClientError> {
        self.send(self.http.get(format!("{}{path}", self.base)))
    }

    pub fn post(&self, path: &str, body: &Value) -> Result<Value, ClientError> {
        self.send(self.http.post(format!("{}{path}", self.base)).json(body))
    }

    pub fn create_session(&self, body: &Value) -> Result<String, ClientError> {
        let v = self.post("/api/sessions", body)?;
        Ok(v["id"].as_str().unwrap_or_default().to_string())
    }

    pub fn post_input(&self, id: &str, text: &str) -> Result<(), ClientError> {
        self.post(&format!("/api/sessions/{id}/input"), &json!({"text": text}))?;
        Ok(())
    }

    pub fn events(&self, id: &str, since: u64, timeout_ms: u64) -> Result<Vec<Event>, ClientError> {
        let v = self.get(&format!("/api/sessions/{id}/events?since={since}&timeout_ms={timeout_ms}"))?;
        serde_json::from_value::<Events>(v).map(|e| e.events).map_err(|e| ClientError::Replay(e.to_string()))
    }

    pub fn state(&self, id: &str) -> Result<Snapshot, ClientError> {
        let v = self.get(&format!("/api/sessions/{id}/state"))?;
        serde_json::from_value(v).map_err(|e| ClientError::Replay(e.to_string()))
    }

    pub fn approve(&self, id: &str, index: usize) -> Result<CycleRecord, ClientError> {
        let v = self.post(&format!("/api/sessions/{id}/steps/{index}/approve"), &json!({}))?;
        serde_json::from_value(v).map_err(|e| ClientError::Replay(e.to_string()))
    }

    /// Wait until the session has worked through every queued command.
    pub fn settle(&self, id: &str, timeout: Duration) -> Result<Snapshot, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            let s = self.state(id)?;
            if s.processed >= s.queued {
                return Ok(s);
            }
            if Instant::now() >= deadline {
                return Err(ClientError::Timeout(format!("session {id} still busy")));
            }
            thread::sleep(Duration::from_millis(5));
        }
    }

    /// Drive a scenario in manual mode: deliver its inputs at their cycles,
    /// approve every held cycle, and rebuild the report from the event log
    /// and the final STATE.
    pub fn run_scenario(&self, scenario: &dyn Scenario, seed: u64, storage: &Storage) -> Result<Report, ClientError> {
        let timeout = Duration::from_secs(60);
        let id = self.create_session(&json!({"mode": "manual", "scenario": scenario.name(), "seed": seed}))?;
        let mut inputs: Vec<_> = scenario.bundle().entry_inputs.iter().collect();
        let mut snapshot = self.settle(&id, timeout)?;
        loop {
            let next = snapshot.cycles + 1;
            while let Some(at) = inputs.iter().position(|i| i.cycle <= next) {
                self.post_input(&id, &inputs.remove(at).text)?;
            }
            snapshot = self.settle(&id, timeout)?;
            if let Some(index) = snapshot.pending {
                self.approve(&id, index)?;
                snapshot = self.settle(&id, timeout)?;
                continue;
            }
            if inputs.is_empty() || snapshot.last_error.is_some() {
                break;
            }
            let text = inputs.remove(0).text.clone();
            self.post_input(&id, &text)?;
            snapshot = self.settle(&id, timeout)?;
        }
        let history = replay(&self.events(&id, 0, 0)?).map_err(ClientError::Replay)?;
        Ok(build_report(scenario, seed, &history, &snapshot.state, Some(storage), snapshot.last_error))
    }
}
