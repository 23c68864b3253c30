use std::collections::BTreeMap;
use std::sync::Arc;

use super::KbError;

pub const DEFAULT_DIM: usize = 256;

/// Turns text into a unit-norm vector.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, KbError>;
}

/// Lab vocabulary that is commonly abbreviated. The expansion is added next
/// to the abbreviation so both spellings land in shared buckets.
const EXPANSIONS: &[(&str, &str)] = &[
    ("vna", "vector network analyzer"),
    ("qnd", "quantum non demolition"),
    ("rilb", "readout induced leakage benchmarking"),
    ("s21", "transmission"),
    ("qi", "internal quality factor"),
    ("qc", "coupling quality factor"),
    ("fr", "resonance frequency"),
    ("ghz", "frequency"),
    ("mhz", "frequency"),
    ("lm", "levenberg marquardt"),
];

/// Lowercase alphanumeric runs, with a trailing plural `s` dropped from
/// words longer than three characters and known abbreviations expanded.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        let mut token = raw.to_lowercase();
        if token.chars().count() > 3 && token.ends_with('s') && !token.ends_with("ss") {
            token.pop();
        }
        if let Some((_, expansion)) = EXPANSIONS.iter().find(|(short, _)| *short == token) {
            out.extend(expansion.split(' ').map(str::to_string));
        }
        out.push(token);
    }
    out
}

/// FNV-1a, fixed so that stored embeddings stay valid across builds.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Hashed bag of words with `1 + ln(count)` weighting.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl Embedder for HashEmbedder {
    fn name(&self) -> &str {
        "hash"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, KbError> {
        if text.trim().is_empty() {
            return Err(KbError::EmptyText);
        }
        let mut counts = vec![0u32; self.dim];
        for token in tokenize(text) {
            counts[(fnv1a(token.as_bytes()) % self.dim as u64) as usize] += 1;
        }
        let mut v: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { 1.0 + f64::from(c).ln() })
            .collect();
        if v.iter().all(|&x| x == 0.0) {
            // Text made only of punctuation still gets a stable direction.
            v[(fnv1a(text.trim().as_bytes()) % self.dim as u64) as usize] = 1.0;
        }
        normalize(&mut v);
        Ok(v)
    }
}

pub(crate) fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, KbError> {
    if a.len() != b.len() {
        return Err(KbError::InvalidVector(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(KbError::InvalidVector("zero or non-finite vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Embedding service speaking the common `/embeddings` JSON shape:
/// `{"model", "input"}` in, `{"data": [{"embedding": [...]}]}` out.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>, dim: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            dim,
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn name(&self) -> &str {
        "remote"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, KbError> {
        if text.trim().is_empty() {
            return Err(KbError::EmptyText);
        }
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({"model": self.model, "input": text}));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let body: serde_json::Value = req
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| KbError::Embedder(e.to_string()))?;
        let mut v: Vec<f64> = body["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| KbError::Embedder("reply has no data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| KbError::Embedder("non-numeric embedding entry".into())))
            .collect::<Result<_, _>>()?;
        if v.len() != self.dim {
            return Err(KbError::InvalidVector(format!("expected {} values, got {}", self.dim, v.len())));
        }
        if v.iter().all(|&x| x == 0.0) || v.iter().any(|x| !x.is_finite()) {
            return Err(KbError::InvalidVector("zero or non-finite embedding".into()));
        }
        normalize(&mut v);
        Ok(v)
    }
}

type EmbedderFactory = Arc<dyn Fn(usize) -> Result<Arc<dyn Embedder>, KbError> + Send + Sync>;

/// Embedders by name.
#[derive(Clone, Default)]
pub struct EmbedderRegistry {
    factories: BTreeMap<String, EmbedderFactory>,
}

impl EmbedderRegistry {
    /// `hash`, plus `remote` configured from `HAL_EMBED_ENDPOINT`,
    /// `HAL_EMBED_MODEL` and the variable named by `HAL_EMBED_API_KEY_VAR`.
    pub fn standard() -> Self {
        let mut r = Self::default();
        r.register("hash", |dim| Ok(Arc::new(HashEmbedder::new(dim)) as Arc<dyn Embedder>));
        r.register("remote", |dim| {
            let endpoint = std::env::var("HAL_EMBED_ENDPOINT")
                .map_err(|_| KbError::Embedder("HAL_EMBED_ENDPOINT is not set".into()))?;
            let model = std::env::var("HAL_EMBED_MODEL").unwrap_or_default();
            let key = std::env::var("HAL_EMBED_API_KEY_VAR").ok().and_then(|v| std::env::var(v).ok());
            Ok(Arc::new(RemoteEmbedder::new(endpoint, model, key, dim)) as Arc<dyn Embedder>)
        });
        r
    }

    pub fn register(
        &mut self,
        name: &str,
        factory: impl Fn(usize) -> Result<Arc<dyn Embedder>, KbError> + Send + Sync + 'static,
    ) {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn create(&self, name: &str, dim: usize) -> Result<Arc<dyn Embedder>, KbError> {
        let f = self
            .factories
            .get(name)
            .ok_or_else(|| KbError::Embedder(format!("unknown embedder {name:?}")))?;
        f(dim)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}
