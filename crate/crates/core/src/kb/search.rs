use std::collections::BTreeSet;

use serde::Serialize;

use super::{Document, KbError, KnowledgeBase};
use crate::model::{ModelAdapter, ModelRequest, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub max_iter: usize,
    pub k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { max_iter: 5, k: 4 }
    }
}

/// Which component is asking; each gets its own search instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchPurpose {
    Plan,
    Develop,
    Answer,
}

impl SearchPurpose {
    fn instructions(self) -> &'static str {
        match self {
            SearchPurpose::Plan => {
                "You are collecting documents for the planner, which decides the next experimental step. \
                 Keep protocols, plans and lab conventions that bear on the task. Drop documents that do not help \
                 decide what to do next. Ask for any protocol or document the gathered ones refer to but which is missing."
            }
            SearchPurpose::Develop => {
                "You are collecting documents for the developer, which writes an experiment script. \
                 Keep API references, coding guides and code examples for the operations the task needs. \
                 Drop documents that describe unrelated instruments or analyses. Ask for any function or example \
                 the gathered ones mention but which is missing."
            }
            SearchPurpose::Answer => {
                "You are collecting documents to answer a question or write a document. Keep anything that \
                 supports a grounded answer. Drop documents that are off topic. Ask for anything referenced but missing."
            }
        }
    }
}

/// Structured state of one search.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchState {
    pub task: String,
    pub queries_done: Vec<String>,
    pub gathered: Vec<String>,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub documents: Vec<Document>,
    pub state: SearchState,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchReply {
    pub drop: Vec<String>,
    pub queries: Vec<String>,
}

/// Read `DROP:` and `QUERIES:` sections. Text outside them is ignored;
/// items may follow the label on the same line or one per line below it.
pub fn parse_search_reply(raw: &str) -> Result<SearchReply, KbError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Drop,
        Queries,
    }
    let mut section = Section::None;
    let mut seen = false;
    let mut reply = SearchReply::default();
    for line in raw.lines() {
        let trimmed = line.trim();
        let upper = trimmed.to_ascii_uppercase();
        let rest = if upper.starts_with("DROP:") {
            section = Section::Drop;
            seen = true;
            &trimmed[5..]
        } else if upper.starts_with("QUERIES:") {
            section = Section::Queries;
            seen = true;
            &trimmed[8..]
        } else {
            trimmed
        };
        let item = rest.trim().trim_start_matches(['-', '*']).trim();
        if item.is_empty() || item.eq_ignore_ascii_case("none") || item.eq_ignore_ascii_case("(none)") {
            continue;
        }
        match section {
            Section::Drop => reply.drop.extend(item.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty())),
            Section::Queries => reply.queries.push(item.to_string()),
            Section::None => {}
        }
    }
    if seen {
        Ok(reply)
    } else {
        Err(KbError::SearchProtocol { raw: raw.to_string() })
    }
}

fn render_state(state: &SearchState, purpose: SearchPurpose) -> String {
    format!(
        "{}\n\nTask:\n{}\n\nQueries already run:\n{}\n\nIteration {}.\n\
         Reply with a DROP: section listing ids of gathered documents that are irrelevant (one per line, or none) \
         and a QUERIES: section listing new search queries for missing information (one per line, or none).",
        purpose.instructions(),
        state.task,
        state
            .queries_done
            .iter()
            .map(|q| format!("- {q}"))
            .collect::<Vec<_>>()
            .join("\n"),
        state.iteration,
    )
}

/// Retrieve documents for `task`, letting `model` prune the gathered set and
/// propose follow-up queries. At most `cfg.max_iter` model consultations.
pub fn iterative_search(
    kb: &KnowledgeBase,
    task: &str,
    model: &dyn ModelAdapter,
    purpose: SearchPurpose,
    cfg: SearchConfig,
) -> Result<SearchOutcome, KbError> {
    let index = kb.snapshot();
    let mut state = SearchState {
        task: task.to_string(),
        ..SearchState::default()
    };
    if index.is_empty() || task.trim().is_empty() {
        return Ok(SearchOutcome {
            documents: Vec::new(),
            state,
        });
    }
    let mut dropped = BTreeSet::new();
    let mut pending = vec![task.trim().to_string()];
    loop {
        for q in std::mem::take(&mut pending) {
            if state.queries_done.contains(&q) {
                continue;
            }
            let v = kb.embed(&q)?;
            state.queries_done.push(q);
            for (id, score) in index.top_k(&v, cfg.k)? {
                if score > 0.0 && !dropped.contains(&id) && !state.gathered.contains(&id) {
                    state.gathered.push(id);
                }
            }
        }
        if state.iteration >= cfg.max_iter {
            break;
        }
        state.iteration += 1;
        let docs: Vec<Document> = state.gathered.iter().filter_map(|id| index.get(id).cloned()).collect();
        let request = ModelRequest::new(Role::Search, render_state(&state, purpose)).with_documents(docs);
        let raw = model.generate(&request)?;
        let reply = parse_search_reply(&raw)?;
        for id in reply.drop {
            if let Some(at) = state.gathered.iter().position(|g| *g == id) {
                state.gathered.remove(at);
            }
            dropped.insert(id);
        }
        pending = reply
            .queries
            .into_iter()
            .filter(|q| !state.queries_done.contains(q))
            .collect();
        pending.dedup();
        if pending.is_empty() {
            break;
        }
    }
    let documents = state.gathered.iter().filter_map(|id| index.get(id).cloned()).collect();
    Ok(SearchOutcome { documents, state })
}
