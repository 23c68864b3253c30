use std::collections::BTreeMap;
use std::sync::Arc;

use crate::client::{Lab, LocalLab, RemoteLab};
use crate::config::LabConfig;
use crate::error::LabError;

type Opener = Box<dyn Fn(&str) -> Result<Arc<dyn Lab>, LabError> + Send + Sync>;

/// Lab backends keyed by endpoint scheme.
///
/// An endpoint is `scheme`, `scheme:rest` or `scheme://rest`; the opener
/// receives `rest`.
#[derive(Default)]
pub struct LabRegistry {
    openers: BTreeMap<String, Opener>,
}

impl LabRegistry {
    /// `local` and `tcp`.
    pub fn standard() -> Self {
        let mut reg = Self::default();
        reg.register("local", |_| Ok(Arc::new(LocalLab::new(LabConfig::default())?)));
        reg.register("tcp", |addr| {
            if addr.is_empty() {
                return Err(LabError::BadRequest("tcp endpoint needs host:port".into()));
            }
            Ok(Arc::new(RemoteLab::new(addr)))
        });
        reg
    }

    pub fn register(&mut self, scheme: &str, open: impl Fn(&str) -> Result<Arc<dyn Lab>, LabError> + Send + Sync + 'static) {
        self.openers.insert(scheme.to_string(), Box::new(open));
    }

    pub fn schemes(&self) -> impl Iterator<Item = &str> {
        self.openers.keys().map(String::as_str)
    }

    pub fn open(&self, endpoint: &str) -> Result<Arc<dyn Lab>, LabError> {
        let (scheme, rest) = match endpoint.split_once(':') {
            Some((s, r)) => (s, r.strip_prefix("//").unwrap_or(r)),
            None => (endpoint, ""),
        };
        let open = self.openers.get(scheme).ok_or_else(|| {
            let known: Vec<&str> = self.schemes().collect();
            LabError::BadRequest(format!("unknown lab endpoint {endpoint:?}; known schemes: {}", known.join(", ")))
        })?;
        open(rest)
    }
}
