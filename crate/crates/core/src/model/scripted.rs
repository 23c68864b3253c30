use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use super::{ModelAdapter, ModelError, ModelRequest, Role};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedEntry {
    pub role: Role,
    /// Substring the rendered request must contain; empty matches anything.
    pub matcher: String,
    pub reply: String,
    /// Sticky entries are never consumed. They answer requests of their role
    /// whenever the next queued entry belongs to a different role.
    pub sticky: bool,
}

/// Replays an ordered transcript and fails loudly on any mismatch.
pub struct ScriptedModel {
    name: String,
    queue: Mutex<VecDeque<ScriptedEntry>>,
    sticky: Vec<ScriptedEntry>,
}

impl ScriptedModel {
    pub fn new(name: impl Into<String>, entries: Vec<ScriptedEntry>) -> Self {
        let (sticky, queue): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| e.sticky);
        Self {
            name: name.into(),
            queue: Mutex::new(queue.into()),
            sticky,
        }
    }

    /// Parse the transcript format: records separated by `---` lines, each with
    /// `role:`, optional `match:` and `sticky:` headers, then `reply:` followed
    /// by the verbatim reply.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, ModelError> {
        let mut entries = Vec::new();
        let text = text.replace("\r\n", "\n");
        let mut lines = text.lines().peekable();
        let mut record = 0;
        while lines.peek().is_some() {
            record += 1;
            let err = |m: String| ModelError::Script(format!("transcript record {record}: {m}"));
            let (mut role, mut matcher, mut sticky) = (None, String::new(), false);
            let mut reply = None;
            while let Some(line) = lines.next() {
                let t = line.trim();
                if t.is_empty() || t.starts_with("//") {
                    continue;
                }
                if t == "---" {
                    break;
                }
                let (key, value) = t.split_once(':').ok_or_else(|| err(format!("expected a header, got {t:?}")))?;
                match key.trim() {
                    "role" => role = Some(Role::parse(value).ok_or_else(|| err(format!("unknown role {value:?}")))?),
                    "match" => matcher = value.trim().to_string(),
                    "sticky" => sticky = value.trim() == "true",
                    "reply" => {
                        let mut body: Vec<&str> = Vec::new();
                        if !value.trim().is_empty() {
                            body.push(value.trim_start());
                        }
                        for line in lines.by_ref() {
                            if line.trim_end() == "---" {
                                break;
                            }
                            body.push(line);
                        }
                        while body.last().is_some_and(|l| l.trim().is_empty()) {
                            body.pop();
                        }
                        reply = Some(body.join("\n"));
                        break;
                    }
                    other => return Err(err(format!("unknown header {other:?}"))),
                }
            }
            match (role, reply) {
                (Some(role), Some(reply)) => entries.push(ScriptedEntry {
                    role,
                    matcher,
                    reply,
                    sticky,
                }),
                (None, None) => {}
                _ => return Err(err("needs both role: and reply:".into())),
            }
        }
        Ok(Self::new(name, entries))
    }

    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Script(format!("{}: {e}", path.display())))?;
        let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        Self::parse(name, &text)
    }

    /// Queued entries not yet consumed.
    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("transcript lock poisoned").len()
    }

    pub fn entries(&self) -> Vec<ScriptedEntry> {
        let q = self.queue.lock().expect("transcript lock poisoned");
        q.iter().chain(&self.sticky).cloned().collect()
    }
}

impl ModelAdapter for ScriptedModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, request: &ModelRequest) -> Result<String, ModelError> {
        let rendered = request.render();
        let mut queue = self.queue.lock().expect("transcript lock poisoned");
        match queue.front() {
            Some(next) if next.role == request.role => {
                if !rendered.contains(&next.matcher) {
                    return Err(ModelError::Script(format!(
                        "{}: next {} entry expects {:?}, which the request does not contain",
                        self.name, next.role, next.matcher
                    )));
                }
                Ok(queue.pop_front().expect("front exists").reply)
            }
            next => self
                .sticky
                .iter()
                .find(|e| e.role == request.role && rendered.contains(&e.matcher))
                .map(|e| e.reply.clone())
                .ok_or_else(|| {
                    ModelError::Script(format!(
                        "{}: unexpected {} request; next entry is {}",
                        self.name,
                        request.role,
                        next.map_or("the end of the transcript".to_string(), |e| format!("a {} entry", e.role))
                    ))
                }),
        }
    }
}
