//! Knowledge documents, their embeddings, and the iterative search agent.

mod doc;
mod embed;
mod search;
mod store;

use thiserror::Error;

pub use doc::{body_refs, fenced_block, slug, valid_id, DocInput, DocKind, Document};
pub use embed::{cosine, tokenize, Embedder, EmbedderRegistry, HashEmbedder, RemoteEmbedder, DEFAULT_DIM};
pub use search::{
    iterative_search, parse_search_reply, SearchConfig, SearchOutcome, SearchPurpose, SearchReply, SearchState,
};
pub use store::{read_sidecar, Index, KnowledgeBase, LintWarning};

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("text is empty")]
    EmptyText,
    #[error("invalid vector: {0}")]
    InvalidVector(String),
    #[error("invalid document id {0:?}")]
    InvalidId(String),
    #[error("document id {0:?} already exists")]
    DuplicateId(String),
    #[error("malformed knowledge file: {0}")]
    Format(String),
    #[error("embedder failed: {0}")]
    Embedder(String),
    #[error("search reply has neither DROP: nor QUERIES: section: {raw:?}")]
    SearchProtocol { raw: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
