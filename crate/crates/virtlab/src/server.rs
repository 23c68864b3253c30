use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde_json::Value;

use crate::wire::{parse_payload, read_frame, write_frame, Reply, Request};
use crate::{qubit_sequence, vna_sweep, LabConfig, LabError};

/// A running lab server. Dropping it stops the accept loop.
pub struct LabServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl LabServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn endpoint(&self) -> String {
        format!("tcp://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    /// Block until the accept loop exits.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for LabServer {
    fn drop(&mut self) {
        if self.handle.is_some() {
            self.stop_now();
        }
    }
}

/// Bind `addr` (port 0 picks a free port) and serve `config` on a
/// background thread, one thread per connection.
pub fn serve(addr: impl ToSocketAddrs, config: LabConfig) -> io::Result<LabServer> {
    config
        .validate()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let config = Arc::new(config);
    let flag = Arc::clone(&stop);
    let handle = thread::Builder::new().name("lab-accept".into()).spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let config = Arc::clone(&config);
            let _ = thread::Builder::new()
                .name("lab-conn".into())
                .spawn(move || {
                    let _ = handle_connection(stream, &config);
                });
        }
    })?;
    Ok(LabServer {
        addr,
        stop,
        handle: Some(handle),
    })
}

fn handle_connection(stream: TcpStream, config: &LabConfig) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        let body = match read_frame(&mut reader) {
            Ok(Some(b)) => b,
            Ok(None) => return Ok(()),
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                let reply = Reply::error(&LabError::BadRequest(e.to_string()));
                return write_frame(&mut writer, &reply.to_json());
            }
            Err(e) => return Err(e),
        };
        let reply = match parse_payload(&body) {
            Ok(v) => dispatch(v, config),
            Err(e) => Reply::error(&LabError::BadRequest(e.to_string())),
        };
        write_frame(&mut writer, &reply.to_json())?;
    }
}

/// Execute one decoded request against `config`.
pub(crate) fn dispatch(payload: Value, config: &LabConfig) -> Reply {
    let req: Request = match serde_json::from_value(payload) {
        Ok(r) => r,
        Err(e) => return Reply::error(&LabError::BadRequest(e.to_string())),
    };
    let result = match req {
        Request::Sweep(r) => vna_sweep(&r, config).map(Reply::Sweep),
        Request::Sequence(r) => qubit_sequence(&r, &config.qubit).map(Reply::Sequence),
    };
    result.unwrap_or_else(|e| Reply::error(&e))
}
