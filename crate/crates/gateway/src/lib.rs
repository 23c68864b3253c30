//! HTTP/JSON access to sessions, the knowledge base and stored datasets.
//!
//! Every session runs on its own worker thread. Requests that change a
//! session are queued to that worker; reads of events and STATE never wait
//! for it. Events are fetched with a cursor and an optional long poll.

mod client;
mod error;
mod routes;
mod worker;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use hal_core::engine::{Engine, Mode};
use hal_core::events::{ClockRegistry, EventLog};
use hal_core::kb::KnowledgeBase;
use hal_core::model::{ModelAdapter, ModelError, ModelRegistry, ScriptedModel};
use hal_runtime::Host;
use hal_scenarios::{fixture, scenario_lab, ScenarioRegistry};
use hal_virtlab::{LabError, LabRegistry, Storage};

pub use client::{ClientError, GatewayClient};
pub use error::ApiError;
pub use worker::{SessionHandle, Snapshot};

#[derive(Clone)]
pub struct GatewayConfig {
    pub kb: Arc<KnowledgeBase>,
    pub data_dir: PathBuf,
    /// Used by knowledge searches that name no model.
    pub default_model: Option<String>,
    /// Name in the standard clock registry.
    pub clock: String,
    /// Upper bound on `timeout_ms` for event polls.
    pub max_poll: Duration,
}

/// Parameters of `POST /api/sessions`.
#[derive(Debug, Clone, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub lab: Option<String>,
    /// Shorthand for the scenario's transcript, seeded lab and STATE priming.
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

pub struct Gateway {
    pub config: GatewayConfig,
    pub scenarios: Arc<ScenarioRegistry>,
    pub models: ModelRegistry,
    pub labs: LabRegistry,
    storage: Storage,
    clocks: ClockRegistry,
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
    next_id: AtomicU64,
}

fn transcript_model(scenarios: &ScenarioRegistry, name: &str) -> Result<Arc<dyn ModelAdapter>, ModelError> {
    if let Ok(s) = scenarios.get(name) {
        return Ok(Arc::new(s.bundle().model().map_err(|e| ModelError::Config(e.to_string()))?));
    }
    let text = fixture(&format!("transcripts/{name}.txt"))
        .ok_or_else(|| ModelError::Config(format!("unknown transcript {name:?}")))?;
    Ok(Arc::new(ScriptedModel::parse(name, text)?))
}

impl Gateway {
    pub fn new(config: GatewayConfig, scenarios: ScenarioRegistry) -> Self {
        let scenarios = Arc::new(scenarios);
        let mut models = ModelRegistry::standard();
        let s = Arc::clone(&scenarios);
        models.register("scripted", move |name| transcript_model(&s, name));
        let mut labs = LabRegistry::standard();
        let s = Arc::clone(&scenarios);
        labs.register("scenario", move |rest| {
            let (name, seed) = match rest.split_once('@') {
                Some((n, seed)) => (n, seed.parse().map_err(|_| LabError::BadRequest(format!("bad seed {seed:?}")))?),
                None => (rest, 0),
            };
            let scenario = s.get(name).map_err(|e| LabError::BadRequest(e.to_string()))?;
            scenario_lab(scenario.as_ref(), seed).map_err(|e| LabError::BadRequest(e.to_string()))
        });
        Self {
            storage: Storage::new(&config.data_dir),
            config,
            scenarios,
            models,
            labs,
            clocks: ClockRegistry::standard(),
            sessions: RwLock::default(),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))
    }

    pub fn create_session(&self, req: CreateSession) -> Result<Arc<SessionHandle>, ApiError> {
        let mode = match req.mode.as_deref() {
            None => Mode::Auto,
            Some(m) => Mode::parse(m).ok_or_else(|| ApiError::bad_request(format!("unknown mode {m:?}")))?,
        };
        let scenario = req
            .scenario
            .as_deref()
            .map(|name| self.scenarios.get(name).map_err(|e| ApiError::bad_request(e.to_string())))
            .transpose()?;
        let model_ref = req
            .model
            .or_else(|| scenario.as_ref().map(|s| format!("scripted:{}", s.name())))
            .ok_or_else(|| ApiError::bad_request("model is required"))?;
        let model = self.models.resolve(&model_ref).map_err(|e| ApiError::bad_request(e.to_string()))?;
        let lab_ref = req.lab.or_else(|| scenario.as_ref().map(|s| format!("scenario:{}@{}", s.name(), req.seed)));
        let lab = lab_ref
            .map(|endpoint| self.labs.open(&endpoint).map_err(|e| ApiError::bad_request(e.to_string())))
            .transpose()?;
        let clock = self
            .clocks
            .create(&self.config.clock)
            .ok_or_else(|| ApiError::internal(format!("unknown clock {:?}", self.config.clock)))?;

        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let engine = Engine::new(Arc::clone(&self.config.kb), model);
        let host = Host {
            lab,
            storage: Some(self.storage.clone()),
            ..Host::default()
        };
        let mut session = engine.new_session(id.clone(), mode, host, Arc::new(EventLog::new(clock)));
        if let Some(s) = &scenario {
            s.prime(&engine, &mut session)?;
        }
        let handle = Arc::new(SessionHandle::spawn(engine, session));
        self.sessions.write().expect("session table poisoned").insert(id, Arc::clone(&handle));
        Ok(handle)
    }
}

pub use routes::router;

/// Serve on an already bound listener until the process ends.
pub async fn serve(listener: tokio::net::TcpListener, gateway: Arc<Gateway>) -> std::io::Result<()> {
    axum::serve(listener, router(gateway)).await
}
