//! Random corpora for the iterative retrieval suite.
//!
//! Every case holds a plan document that points, through a `[[id]]` link, at
//! a target document sharing no vocabulary with the task. Plain similarity
//! search never finds the target; a search model that follows the link does.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use hal_core::kb::{iterative_search, DocInput, DocKind, HashEmbedder, KbError, KnowledgeBase, SearchConfig, SearchPurpose};
use hal_core::model::{ModelAdapter, ModelError, ModelRequest};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYLLABLES: &[&str] = &[
    "ka", "ro", "mi", "zu", "te", "lo", "vy", "qe", "sa", "no", "bi", "du", "fe", "gu", "ha", "jo", "pe", "wi", "xa", "yo",
];

/// Replays fixed search replies; afterwards either stops or keeps asking for
/// fresh queries forever.
pub struct ScriptedSearch {
    replies: Vec<String>,
    relentless: bool,
    calls: AtomicUsize,
}

impl ScriptedSearch {
    pub fn new(replies: Vec<String>, relentless: bool) -> Self {
        Self {
            replies,
            relentless,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ModelAdapter for ScriptedSearch {
    fn name(&self) -> &str {
        "scripted-search"
    }

    fn generate(&self, _: &ModelRequest) -> Result<String, ModelError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(match self.replies.get(n) {
            Some(r) => r.clone(),
            None if self.relentless => format!("DROP:\nQUERIES:\nfresh query {n}"),
            None => "DROP:\nQUERIES:".to_string(),
        })
    }
}

pub struct RagCase {
    pub seed: u64,
    pub kb: Arc<KnowledgeBase>,
    pub task: String,
    pub plan_id: String,
    pub target_id: String,
    pub replies: Vec<String>,
    pub relentless: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RagResult {
    /// Smallest iteration budget at which the target is gathered.
    pub first_gathered: Option<usize>,
    /// Iterations used with the default budget.
    pub iterations: usize,
    pub model_calls: usize,
    pub gathered: Vec<String>,
}

fn word(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    loop {
        let n = rng.random_range(3..=4);
        let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
        if used.insert(w.clone()) {
            return w;
        }
    }
}

fn sentence(rng: &mut ChaCha8Rng, pool: &[String], n: usize) -> String {
    (0..n).map(|_| pool.choose(rng).expect("non-empty").as_str()).collect::<Vec<_>>().join(" ")
}

impl RagCase {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            if let Some(case) = Self::attempt(seed, &mut rng) {
                return case;
            }
        }
    }

    fn attempt(seed: u64, rng: &mut ChaCha8Rng) -> Option<Self> {
        let mut used = BTreeSet::new();
        let task_words: Vec<String> = (0..8).map(|_| word(rng, &mut used)).collect();
        let target_words: Vec<String> = (0..8).map(|_| word(rng, &mut used)).collect();
        let noise_words: Vec<String> = (0..30).map(|_| word(rng, &mut used)).collect();

        let kb = KnowledgeBase::in_memory(Arc::new(HashEmbedder::default()));
        let target_title = sentence(rng, &target_words, 3);
        let target_id = kb
            .add(DocInput {
                id: None,
                title: target_title.clone(),
                kind: Some(DocKind::Tutorial),
                body: sentence(rng, &target_words, 20),
                refs: vec![],
            })
            .ok()?;
        let plan_id = kb
            .add(DocInput {
                id: None,
                title: sentence(rng, &task_words, 3),
                kind: Some(DocKind::Plan),
                body: format!("{}\nDetails are in [[{target_id}]].", sentence(rng, &task_words, 20)),
                refs: vec![],
            })
            .ok()?;
        let distractors = rng.random_range(4..16);
        let mut distractor_ids = Vec::new();
        for _ in 0..distractors {
            let mut pool = noise_words.clone();
            pool.extend(task_words.choose_multiple(rng, 2).cloned());
            let id = kb
                .add(DocInput {
                    id: None,
                    title: sentence(rng, &noise_words, 3),
                    kind: Some(DocKind::Api),
                    body: sentence(rng, &pool, 15),
                    refs: vec![],
                })
                .ok()?;
            distractor_ids.push(id);
        }
        let task = sentence(rng, &task_words, 5);
        let first = kb.search_text(&task, SearchConfig::default().k).ok()?;
        if first.iter().any(|(id, s)| *id == target_id && *s > 0.0) || first.first().map(|h| &h.0) != Some(&plan_id) {
            return None;
        }

        let mut replies = Vec::new();
        let drop_first: Vec<&String> = first
            .iter()
            .filter(|(_, score)| *score > 0.0)
            .map(|(id, _)| id)
            .filter(|id| **id != plan_id && distractor_ids.contains(id) && rng.random_bool(0.5))
            .collect();
        replies.push(format!(
            "DROP:\n{}\nQUERIES:\n{target_title}",
            drop_first.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n")
        ));
        for _ in 0..rng.random_range(0..7) {
            let n_drop = rng.random_range(0..3);
            let mut drops: Vec<&String> = distractor_ids.choose_multiple(rng, n_drop).collect();
            drops.shuffle(rng);
            let n_query = rng.random_range(0..3);
            let queries: Vec<String> = (0..n_query).map(|_| sentence(rng, &noise_words, 3)).collect();
            replies.push(format!(
                "DROP:\n{}\nQUERIES:\n{}",
                drops.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"),
                queries.join("\n")
            ));
        }
        Some(Self {
            seed,
            kb: Arc::new(kb),
            task,
            plan_id,
            target_id,
            replies,
            relentless: rng.random_bool(0.3),
        })
    }

    pub fn model(&self) -> ScriptedSearch {
        ScriptedSearch::new(self.replies.clone(), self.relentless)
    }

    /// Search once per budget from 0 to the default, then once more with the
    /// default budget to record its iteration count.
    pub fn evaluate(&self) -> Result<RagResult, KbError> {
        let cfg = SearchConfig::default();
        let mut first_gathered = None;
        for budget in 0..=cfg.max_iter {
            let out = iterative_search(
                &self.kb,
                &self.task,
                &self.model(),
                SearchPurpose::Plan,
                SearchConfig { max_iter: budget, ..cfg },
            )?;
            if out.state.gathered.contains(&self.target_id) {
                first_gathered = Some(budget);
                break;
            }
        }
        let model = self.model();
        let out = iterative_search(&self.kb, &self.task, &model, SearchPurpose::Plan, cfg)?;
        Ok(RagResult {
            first_gathered,
            iterations: out.state.iteration,
            model_calls: model.calls(),
            gathered: out.state.gathered,
        })
    }
}
