//! The model-adapter abstraction and the shipped adapters.

mod remote;
mod scripted;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::Document;

pub use remote::RemoteModel;
pub use scripted::{ScriptedEntry, ScriptedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Preprocess,
    Plan,
    Develop,
    Search,
    Answer,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Preprocess, Role::Plan, Role::Develop, Role::Search, Role::Answer];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Preprocess => "preprocess",
            Role::Plan => "plan",
            Role::Develop => "develop",
            Role::Search => "search",
            Role::Answer => "answer",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s.trim())
    }

    /// Thinking level a request for this role gets unless overridden.
    pub fn default_thinking(self) -> Thinking {
        match self {
            Role::Plan | Role::Develop => Thinking::High,
            Role::Preprocess | Role::Search | Role::Answer => Thinking::Low,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Thinking {
    High,
    Low,
}

impl Thinking {
    pub fn as_str(self) -> &'static str {
        match self {
            Thinking::High => "high",
            Thinking::Low => "low",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub role: Role,
    pub thinking: Thinking,
    pub instructions: String,
    pub context_documents: Vec<Document>,
    pub history_digest: String,
}

impl ModelRequest {
    pub fn new(role: Role, instructions: impl Into<String>) -> Self {
        Self {
            role,
            thinking: role.default_thinking(),
            instructions: instructions.into(),
            context_documents: Vec::new(),
            history_digest: String::new(),
        }
    }

    pub fn with_documents(mut self, docs: Vec<Document>) -> Self {
        self.context_documents = docs;
        self
    }

    pub fn with_history(mut self, digest: impl Into<String>) -> Self {
        self.history_digest = digest.into();
        self
    }

    pub fn with_thinking(mut self, thinking: Thinking) -> Self {
        self.thinking = thinking;
        self
    }

    /// The request as one text: instructions, documents, then history.
    pub fn render(&self) -> String {
        let mut out = format!("[{} | thinking: {}]\n\n{}\n", self.role, self.thinking.as_str(), self.instructions);
        if !self.context_documents.is_empty() {
            out.push_str("\n## Documents\n");
            for d in &self.context_documents {
                out.push_str(&format!("\n### {} ({}): {}\n{}\n", d.id, d.kind, d.title, d.body.trim_end()));
            }
        }
        if !self.history_digest.is_empty() {
            out.push_str("\n## History\n");
            out.push_str(&self.history_digest);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("scripted model: {0}")]
    Script(String),
    #[error("model transport: {0}")]
    Transport(String),
    #[error("model configuration: {0}")]
    Config(String),
}

pub trait ModelAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, request: &ModelRequest) -> Result<String, ModelError>;
}

type ModelFactory = Arc<dyn Fn(&str) -> Result<Arc<dyn ModelAdapter>, ModelError> + Send + Sync>;

/// Model adapters by reference string `scheme[:argument]`, e.g.
/// `scripted:resonator` or `remote`.
#[derive(Clone, Default)]
pub struct ModelRegistry {
    factories: BTreeMap<String, ModelFactory>,
}

impl ModelRegistry {
    /// Only `remote`; transcript schemes are registered by the caller.
    pub fn standard() -> Self {
        let mut r = Self::default();
        r.register("remote", |_| Ok(Arc::new(RemoteModel::from_env()?) as Arc<dyn ModelAdapter>));
        r
    }

    pub fn register(
        &mut self,
        scheme: &str,
        factory: impl Fn(&str) -> Result<Arc<dyn ModelAdapter>, ModelError> + Send + Sync + 'static,
    ) {
        self.factories.insert(scheme.to_string(), Arc::new(factory));
    }

    pub fn resolve(&self, reference: &str) -> Result<Arc<dyn ModelAdapter>, ModelError> {
        let (scheme, arg) = reference.split_once(':').unwrap_or((reference, ""));
        let f = self
            .factories
            .get(scheme)
            .ok_or_else(|| ModelError::Config(format!("unknown model {reference:?}")))?;
        f(arg)
    }

    pub fn schemes(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}
