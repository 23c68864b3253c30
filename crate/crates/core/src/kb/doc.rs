use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KbError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Plan,
    Api,
    Example,
    Tutorial,
}

impl DocKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DocKind::Plan => "plan",
            DocKind::Api => "api",
            DocKind::Example => "example",
            DocKind::Tutorial => "tutorial",
        }
    }
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DocKind {
    type Err = KbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "plan" => Ok(DocKind::Plan),
            "api" => Ok(DocKind::Api),
            "example" => Ok(DocKind::Example),
            "tutorial" => Ok(DocKind::Tutorial),
            other => Err(KbError::Format(format!("unknown document kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub kind: DocKind,
    pub body: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub embedding: Option<Vec<f64>>,
    pub refs: Vec<String>,
}

/// Fields supplied when adding a document. A missing id is derived from the title.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocInput {
    #[serde(default)]
    pub id: Option<String>,
    pub title: String,
    pub kind: Option<DocKind>,
    pub body: String,
    #[serde(default)]
    pub refs: Vec<String>,
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 200
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.')
}

/// Ids written as `[[id]]` in a body, in order of first appearance.
pub fn body_refs(body: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = body;
    while let Some(start) = rest.find("[[") {
        rest = &rest[start + 2..];
        let Some(end) = rest.find("]]") else { break };
        let candidate = rest[..end].trim();
        if valid_id(candidate) && !out.iter().any(|r| r == candidate) {
            out.push(candidate.to_string());
        }
        rest = &rest[end + 2..];
    }
    out
}

/// Lowercase slug of a title, usable as an id.
pub fn slug(title: &str) -> String {
    let mut out = String::new();
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
        if out.len() >= 60 {
            break;
        }
    }
    let out = out.trim_end_matches('-').to_string();
    if out.is_empty() {
        "doc".into()
    } else {
        out
    }
}

impl Document {
    /// Parse the on-disk form: `key: value` header lines, a blank line, then the body.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let text = text.replace("\r\n", "\n");
        let (header, body) = match text.split_once("\n\n") {
            Some((h, b)) => (h.to_string(), b.to_string()),
            None => (text.trim_end_matches('\n').to_string(), String::new()),
        };
        let (mut id, mut title, mut kind, mut refs) = (None, None, None, Vec::new());
        for line in header.lines() {
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| KbError::Format(format!("bad header line {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "id" => id = Some(value.to_string()),
                "title" => title = Some(value.to_string()),
                "kind" => kind = Some(value.parse()?),
                "refs" => {
                    refs = value
                        .split(',')
                        .map(str::trim)
                        .filter(|r| !r.is_empty())
                        .map(str::to_string)
                        .collect()
                }
                other => return Err(KbError::Format(format!("unknown header {other:?}"))),
            }
        }
        let id = id.ok_or_else(|| KbError::Format("missing id header".into()))?;
        if !valid_id(&id) {
            return Err(KbError::InvalidId(id));
        }
        for r in body_refs(&body) {
            if !refs.contains(&r) {
                refs.push(r);
            }
        }
        Ok(Self {
            id,
            title: title.ok_or_else(|| KbError::Format("missing title header".into()))?,
            kind: kind.ok_or_else(|| KbError::Format("missing kind header".into()))?,
            body,
            embedding: None,
            refs,
        })
    }

    pub fn to_file_text(&self) -> String {
        format!(
            "id: {}\ntitle: {}\nkind: {}\nrefs: {}\n\n{}",
            self.id,
            self.title.replace('\n', " "),
            self.kind,
            self.refs.join(", "),
            self.body
        )
    }

    /// Text that gets embedded: title then body.
    pub fn embedding_text(&self) -> String {
        format!("{}\n{}", self.title, self.body)
    }

    /// The first fenced code block in the body, if any.
    pub fn code_block(&self) -> Option<String> {
        fenced_block(&self.body)
    }
}

/// Contents of the first ```-fenced block in `text`.
pub fn fenced_block(text: &str) -> Option<String> {
    let mut lines = text.lines();
    lines.by_ref().find(|l| l.trim_start().starts_with("```"))?;
    let mut out = Vec::new();
    for line in lines {
        if line.trim_start().starts_with("```") {
            return Some(out.join("\n"));
        }
        out.push(line);
    }
    None
}
