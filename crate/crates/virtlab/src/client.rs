use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::wire::{parse_payload, read_frame, write_frame, Reply, Request};
use crate::{
    qubit_sequence, vna_sweep, LabConfig, LabError, SequenceRequest, SequenceResponse, SweepRequest, SweepResponse,
};

/// Instrument access used by the runtime.
pub trait Lab: Send + Sync {
    fn sweep(&self, req: &SweepRequest) -> Result<SweepResponse, LabError>;
    fn sequence(&self, req: &SequenceRequest) -> Result<SequenceResponse, LabError>;
    /// Number of requests issued so far.
    fn requests(&self) -> u64;
    fn describe(&self) -> String;
}

/// The simulator in-process.
pub struct LocalLab {
    config: LabConfig,
    count: AtomicU64,
}

impl LocalLab {
    pub fn new(config: LabConfig) -> Result<Self, LabError> {
        config.validate()?;
        Ok(Self {
            config,
            count: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &LabConfig {
        &self.config
    }
}

impl Lab for LocalLab {
    fn sweep(&self, req: &SweepRequest) -> Result<SweepResponse, LabError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        vna_sweep(req, &self.config)
    }

    fn sequence(&self, req: &SequenceRequest) -> Result<SequenceResponse, LabError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        qubit_sequence(req, &self.config.qubit)
    }

    fn requests(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    fn describe(&self) -> String {
        "local".into()
    }
}

type Conn = (BufReader<TcpStream>, BufWriter<TcpStream>);

/// A lab server reached over TCP. Reconnects lazily after a transport failure.
pub struct RemoteLab {
    addr: String,
    conn: Mutex<Option<Conn>>,
    count: AtomicU64,
}

impl RemoteLab {
    pub fn new(addr: impl Into<String>) -> Self {
        Self {
            addr: addr.into(),
            conn: Mutex::new(None),
            count: AtomicU64::new(0),
        }
    }

    fn call(&self, req: &Request) -> Result<Reply, LabError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        let payload = serde_json::to_value(req).map_err(|e| LabError::BadRequest(e.to_string()))?;
        let mut guard = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            let stream = TcpStream::connect(&self.addr)
                .map_err(|e| LabError::Transport(format!("connect {}: {e}", self.addr)))?;
            let _ = stream.set_nodelay(true);
            let read_half = stream
                .try_clone()
                .map_err(|e| LabError::Transport(e.to_string()))?;
            *guard = Some((BufReader::new(read_half), BufWriter::new(stream)));
        }
        let (reader, writer) = guard.as_mut().expect("connection was just established");
        let outcome = write_frame(writer, &payload)
            .and_then(|()| read_frame(reader))
            .map_err(|e| LabError::Transport(e.to_string()))
            .and_then(|body| body.ok_or_else(|| LabError::Transport("connection closed by lab".into())))
            .and_then(|body| parse_payload(&body).map_err(|e| LabError::Transport(e.to_string())))
            .and_then(Reply::from_json);
        if outcome.is_err() {
            *guard = None;
        }
        match outcome? {
            Reply::Error { code, message } if code == "bad_request" => Err(LabError::BadRequest(message)),
            Reply::Error { code, message } => Err(LabError::Remote { code, message }),
            ok => Ok(ok),
        }
    }
}

impl Lab for RemoteLab {
    fn sweep(&self, req: &SweepRequest) -> Result<SweepResponse, LabError> {
        match self.call(&Request::Sweep(req.clone()))? {
            Reply::Sweep(r) => Ok(r),
            _ => Err(LabError::Transport("unexpected reply to sweep".into())),
        }
    }

    fn sequence(&self, req: &SequenceRequest) -> Result<SequenceResponse, LabError> {
        match self.call(&Request::Sequence(req.clone()))? {
            Reply::Sequence(r) => Ok(r),
            _ => Err(LabError::Transport("unexpected reply to sequence".into())),
        }
    }

    fn requests(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    fn describe(&self) -> String {
        format!("tcp://{}", self.addr)
    }
}

/// Open a lab from an endpoint string: `local` (default config) or `tcp://host:port`.
pub fn connect(endpoint: &str) -> Result<Arc<dyn Lab>, LabError> {
    crate::registry::LabRegistry::standard().open(endpoint)
}
