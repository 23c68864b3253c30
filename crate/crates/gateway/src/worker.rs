use std::sync::mpsc::{channel, Sender};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::thread;

use hal_core::engine::{CycleRecord, Engine, EngineError, Session};
use hal_core::events::EventLog;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

enum Command {
    Input(String),
    Approve(usize, Sender<Result<CycleRecord, EngineError>>),
}

/// What readers may see without waiting for the worker.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub state: Json,
    pub cycles: usize,
    pub pending: Option<usize>,
    pub done: bool,
    pub last_error: Option<String>,
    /// Commands accepted and commands finished; equal when the worker is idle.
    pub queued: u64,
    pub processed: u64,
}

/// A session owned by its own thread. Commands run strictly in the order
/// they were sent.
pub struct SessionHandle {
    pub id: String,
    pub mode: &'static str,
    pub events: Arc<EventLog>,
    snapshot: Arc<RwLock<Snapshot>>,
    queued: AtomicU64,
    tx: Sender<Command>,
}

fn snapshot_of(session: &Session, last_error: Option<String>, processed: u64) -> Snapshot {
    Snapshot {
        state: session.env.state_json(),
        cycles: session.history.len(),
        pending: session.pending(),
        done: session.done,
        last_error,
        queued: 0,
        processed,
    }
}

impl SessionHandle {
    pub fn spawn(engine: Engine, session: Session) -> Self {
        let id = session.id.clone();
        let mode = session.mode.as_str();
        let events = Arc::clone(session.events());
        let snapshot = Arc::new(RwLock::new(snapshot_of(&session, None, 0)));
        let (tx, rx) = channel::<Command>();
        let shared = Arc::clone(&snapshot);
        thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || {
                let mut session = session;
                let mut processed = 0;
                let mut error = None;
                for command in rx {
                    processed += 1;
                    match command {
                        Command::Input(text) => session.post_input(text),
                        Command::Approve(index, reply) => {
                            let out = engine.approve(&mut session, index);
                            let ok = out.is_ok();
                            let _ = reply.send(out);
                            if !ok {
                                shared.write().expect("snapshot poisoned").processed = processed;
                                continue;
                            }
                        }
                    }
                    if let Err(e) = engine.advance(&mut session) {
                        error = Some(e.to_string());
                    }
                    *shared.write().expect("snapshot poisoned") = snapshot_of(&session, error.clone(), processed);
                }
            })
            .expect("spawn session worker");
        Self {
            id,
            mode,
            events,
            snapshot,
            queued: AtomicU64::new(0),
            tx,
        }
    }

    pub fn post_input(&self, text: String) {
        self.queued.fetch_add(1, Ordering::SeqCst);
        let _ = self.tx.send(Command::Input(text));
    }

    /// Queue an approval and wait until the held script has run.
    pub fn approve(&self, index: usize) -> Result<CycleRecord, EngineError> {
        let (reply, rx) = channel();
        self.queued.fetch_add(1, Ordering::SeqCst);
        self.tx
            .send(Command::Approve(index, reply))
            .map_err(|_| EngineError::InvalidInput("session worker stopped".into()))?;
        rx.recv().map_err(|_| EngineError::InvalidInput("session worker stopped".into()))?
    }

    pub fn snapshot(&self) -> Snapshot {
        let queued = self.queued.load(Ordering::SeqCst);
        let mut s = self.snapshot.read().expect("snapshot poisoned").clone();
        s.queued = queued;
        s
    }
}
