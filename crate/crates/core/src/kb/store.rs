use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use super::doc::{body_refs, slug, valid_id, DocInput, DocKind, Document};
use super::embed::{cosine, normalize, Embedder};
use super::KbError;

const SIDECAR: &str = "embeddings.halv";
const MAGIC: &[u8; 4] = b"HALV";
const DOC_EXT: &str = "doc";

#[derive(Debug, Clone, Default)]
pub struct Index {
    docs: BTreeMap<String, Document>,
}

impl Index {
    pub fn get(&self, id: &str) -> Option<&Document> {
        self.docs.get(id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> impl Iterator<Item = &Document> {
        self.docs.values()
    }

    /// Highest cosine first, ties by ascending id.
    pub fn top_k(&self, query: &[f64], k: usize) -> Result<Vec<(String, f64)>, KbError> {
        let mut scored = Vec::with_capacity(self.docs.len());
        for d in self.docs.values() {
            if let Some(e) = &d.embedding {
                scored.push((d.id.clone(), cosine(query, e)?));
            }
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintWarning {
    pub doc: String,
    pub dangling: Vec<String>,
}

/// Documents plus their embeddings, optionally mirrored to a directory.
pub struct KnowledgeBase {
    index: RwLock<Arc<Index>>,
    embedder: Arc<dyn Embedder>,
    dir: Option<PathBuf>,
}

impl KnowledgeBase {
    pub fn in_memory(embedder: Arc<dyn Embedder>) -> Self {
        Self {
            index: RwLock::default(),
            embedder,
            dir: None,
        }
    }

    /// Load every `*.doc` file in `dir`. Stored embeddings are reused when the
    /// sidecar matches the embedder dimension; anything else is re-embedded.
    pub fn open(dir: impl Into<PathBuf>, embedder: Arc<dyn Embedder>) -> Result<Self, KbError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut stored = read_sidecar(&dir.join(SIDECAR)).unwrap_or_default();
        if stored.values().any(|v| v.len() != embedder.dim()) {
            stored.clear();
        }
        let mut index = Index::default();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == DOC_EXT))
            .collect();
        paths.sort();
        let mut reembedded = false;
        for path in paths {
            let mut doc = Document::parse(&fs::read_to_string(&path)?)
                .map_err(|e| KbError::Format(format!("{}: {e}", path.display())))?;
            doc.embedding = match stored.remove(&doc.id) {
                Some(v) => Some(v),
                None => {
                    reembedded = true;
                    Some(embedder.embed(&doc.embedding_text())?)
                }
            };
            index.docs.insert(doc.id.clone(), doc);
        }
        let kb = Self {
            index: RwLock::new(Arc::new(index)),
            embedder,
            dir: Some(dir),
        };
        if reembedded || !stored.is_empty() {
            kb.write_sidecar(&kb.snapshot())?;
        }
        Ok(kb)
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// A consistent view for readers; later writes do not affect it.
    pub fn snapshot(&self) -> Arc<Index> {
        Arc::clone(&self.index.read().expect("kb lock poisoned"))
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot().is_empty()
    }

    pub fn get(&self, id: &str) -> Option<Document> {
        self.snapshot().get(id).cloned()
    }

    pub fn list(&self) -> Vec<Document> {
        self.snapshot().docs().cloned().collect()
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>, KbError> {
        self.embedder.embed(text)
    }

    pub fn top_k(&self, query: &[f64], k: usize) -> Result<Vec<(String, f64)>, KbError> {
        self.snapshot().top_k(query, k)
    }

    pub fn search_text(&self, text: &str, k: usize) -> Result<Vec<(String, f64)>, KbError> {
        let q = self.embed(text)?;
        self.top_k(&q, k)
    }

    /// Embed, index and persist a document. Returns its id.
    pub fn add(&self, input: DocInput) -> Result<String, KbError> {
        if input.title.trim().is_empty() {
            return Err(KbError::Format("document title is empty".into()));
        }
        if input.body.trim().is_empty() {
            return Err(KbError::EmptyText);
        }
        let mut refs: Vec<String> = Vec::new();
        for r in input.refs.into_iter().chain(body_refs(&input.body)) {
            if !valid_id(&r) {
                return Err(KbError::InvalidId(r));
            }
            if !refs.contains(&r) {
                refs.push(r);
            }
        }
        let mut doc = Document {
            id: String::new(),
            title: input.title.trim().to_string(),
            kind: input.kind.unwrap_or(DocKind::Tutorial),
            body: input.body,
            embedding: None,
            refs,
        };
        doc.embedding = Some(self.embedder.embed(&doc.embedding_text())?);

        let mut guard = self.index.write().expect("kb lock poisoned");
        doc.id = match input.id {
            Some(id) => {
                if !valid_id(&id) {
                    return Err(KbError::InvalidId(id));
                }
                if guard.docs.contains_key(&id) {
                    return Err(KbError::DuplicateId(id));
                }
                id
            }
            None => {
                let base = slug(&doc.title);
                (1..)
                    .map(|n| if n == 1 { base.clone() } else { format!("{base}-{n}") })
                    .find(|id| !guard.docs.contains_key(id))
                    .expect("unbounded")
            }
        };
        let id = doc.id.clone();
        let mut next = Index::clone(&guard);
        next.docs.insert(id.clone(), doc.clone());
        let next = Arc::new(next);
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join(format!("{id}.{DOC_EXT}")), doc.to_file_text().as_bytes())?;
            self.write_sidecar(&next)?;
        }
        *guard = next;
        Ok(id)
    }

    /// Documents whose refs name ids that are not in the base.
    pub fn lint(&self) -> Vec<LintWarning> {
        let index = self.snapshot();
        index
            .docs()
            .filter_map(|d| {
                let dangling: Vec<String> = d.refs.iter().filter(|r| index.get(r).is_none()).cloned().collect();
                (!dangling.is_empty()).then(|| LintWarning {
                    doc: d.id.clone(),
                    dangling,
                })
            })
            .collect()
    }

    fn write_sidecar(&self, index: &Index) -> Result<(), KbError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let dim = self.embedder.dim();
        let records: Vec<(&str, &[f64])> = index
            .docs()
            .filter_map(|d| d.embedding.as_deref().map(|e| (d.id.as_str(), e)))
            .collect();
        let mut buf = Vec::with_capacity(12 + records.len() * (4 * dim + 32));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
        buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
        for (id, v) in records {
            buf.extend_from_slice(&(id.len() as u16).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
            for x in v {
                buf.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        write_atomic(&dir.join(SIDECAR), &buf)?;
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}

/// Parse a sidecar file. Vectors are renormalized after the f32 round trip.
pub fn read_sidecar(path: &Path) -> Result<BTreeMap<String, Vec<f64>>, KbError> {
    let bytes = fs::read(path)?;
    let bad = |what: &str| KbError::Format(format!("{}: {what}", path.display()));
    let mut at = 0usize;
    let mut take = |n: usize| -> Result<&[u8], KbError> {
        let s = bytes.get(at..at + n).ok_or_else(|| bad("truncated"))?;
        at += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let dim = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let count = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as usize;
        let id = String::from_utf8(take(len)?.to_vec()).map_err(|_| bad("id is not UTF-8"))?;
        let mut v = take(4 * dim)?
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect::<Vec<_>>();
        normalize(&mut v);
        out.insert(id, v);
    }
    Ok(out)
}
