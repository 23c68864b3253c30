use std::collections::BTreeMap;
use std::sync::Arc;

use hal_core::kb::{
    body_refs, cosine, read_sidecar, DocInput, DocKind, Document, Embedder, EmbedderRegistry, HashEmbedder, KbError,
    KnowledgeBase,
};
use proptest::prelude::*;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn embedding_is_deterministic_and_unit(text in "\\PC{1,80}") {
        prop_assume!(!text.trim().is_empty());
        let e = HashEmbedder::default();
        let a = e.embed(&text).unwrap();
        let b = HashEmbedder::default().embed(&text).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), 256);
        prop_assert!((norm(&a) - 1.0).abs() < 1e-9);
        prop_assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn empty_text_is_rejected() {
    for t in ["", "   ", "\n\t"] {
        assert!(matches!(HashEmbedder::default().embed(t), Err(KbError::EmptyText)));
    }
}

#[test]
fn cosine_values() {
    assert!((cosine(&[1.0, 0.0, 0.0], &[0.6, 0.8, 0.0]).unwrap() - 0.6).abs() < 1e-15);
    assert_eq!(cosine(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
    assert!((cosine(&[0.3, 0.4], &[0.3, 0.4]).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(KbError::InvalidVector(_))));
    assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(KbError::InvalidVector(_))));
}

#[test]
fn related_phrases_rank_above_unrelated() {
    let e = HashEmbedder::default();
    let a = e.embed("vna sweep spectrum").unwrap();
    let b = e.embed("vector network analyzer scan").unwrap();
    let c = e.embed("qubit pi pulse calibration").unwrap();
    assert!(cosine(&a, &b).unwrap() > cosine(&a, &c).unwrap());
}

/// Maps known texts to fixed vectors.
struct Fixed(BTreeMap<&'static str, Vec<f64>>);

impl Embedder for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }
    fn dim(&self) -> usize {
        3
    }
    fn embed(&self, text: &str) -> Result<Vec<f64>, KbError> {
        let key = text.lines().next().unwrap_or_default();
        self.0.get(key).cloned().ok_or(KbError::EmptyText)
    }
}

fn fixed_kb() -> KnowledgeBase {
    let vectors = BTreeMap::from([
        ("doc1", vec![1.0, 0.0, 0.0]),
        ("doc2", vec![0.0, 1.0, 0.0]),
        ("doc3", vec![0.8, 0.6, 0.0]),
    ]);
    let kb = KnowledgeBase::in_memory(Arc::new(Fixed(vectors)));
    for id in ["doc2", "doc3", "doc1"] {
        kb.add(DocInput {
            id: Some(id.into()),
            title: id.into(),
            kind: Some(DocKind::Api),
            body: "x".into(),
            refs: vec![],
        })
        .unwrap();
    }
    kb
}

#[test]
fn top_k_hand_computed() {
    let kb = fixed_kb();
    let ranked = kb.top_k(&[1.0, 0.0, 0.0], 3).unwrap();
    let ids: Vec<&str> = ranked.iter().map(|(id, _)| id.as_str()).collect();
    assert_eq!(ids, ["doc1", "doc3", "doc2"]);
    assert!((ranked[0].1 - 1.0).abs() < 1e-12);
    assert!((ranked[1].1 - 0.8).abs() < 1e-12);
    assert!(ranked[2].1.abs() < 1e-12);
    assert_eq!(kb.top_k(&[1.0, 0.0, 0.0], 10).unwrap().len(), 3);
    assert_eq!(kb.top_k(&[1.0, 0.0, 0.0], 1).unwrap().len(), 1);
}

#[test]
fn top_k_breaks_ties_by_id_and_handles_empty() {
    let kb = fixed_kb();
    let ranked = kb.top_k(&[0.0, 0.0, 1.0], 3).unwrap();
    let ids: Vec<&str> = ranked.iter().map(|(id, _)| id.as_str()).collect();
    assert_eq!(ids, ["doc1", "doc2", "doc3"]);
    let empty = KnowledgeBase::in_memory(Arc::new(HashEmbedder::default()));
    assert!(empty.top_k(&[1.0; 256], 4).unwrap().is_empty());
}

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["qubit", "sweep", "vna", "fit", "leak", "power", "resonator", "pulse"]), 1..6)
        .prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn ranking_ignores_insertion_order(bodies in prop::collection::vec(words(), 1..12), query in words(), seed in any::<u64>()) {
        let build = |order: &[usize]| {
            let kb = KnowledgeBase::in_memory(Arc::new(HashEmbedder::default()));
            for &i in order {
                kb.add(DocInput { id: Some(format!("d{i:02}")), title: "t".into(), kind: None, body: bodies[i].clone(), refs: vec![] }).unwrap();
            }
            kb.search_text(&query, 5).unwrap()
        };
        let forward: Vec<usize> = (0..bodies.len()).collect();
        let mut shuffled = forward.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(build(&forward), build(&shuffled));
    }
}

#[test]
fn documents_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let e: Arc<dyn Embedder> = Arc::new(HashEmbedder::default());
    let kb = KnowledgeBase::open(dir.path(), e.clone()).unwrap();
    let a = kb
        .add(DocInput {
            id: Some("vna-api".into()),
            title: "VNA API".into(),
            kind: Some(DocKind::Api),
            body: "vna_sweep(f_start, f_stop, points)\nSee [[coding-guide]].\n".into(),
            refs: vec!["storage-api".into()],
        })
        .unwrap();
    let b = kb
        .add(DocInput {
            id: None,
            title: "Coding guide".into(),
            kind: Some(DocKind::Tutorial),
            body: "Save every dataset.".into(),
            refs: vec![],
        })
        .unwrap();
    assert_eq!(b, "coding-guide");
    let before = kb.list();
    drop(kb);

    let bytes = std::fs::read(dir.path().join("embeddings.halv")).unwrap();
    assert_eq!(&bytes[..4], b"HALV");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 256);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
    assert_eq!(bytes.len(), 12 + 2 * (2 + 4 * 256) + a.len() + b.len());
    assert_eq!(read_sidecar(&dir.path().join("embeddings.halv")).unwrap().len(), 2);

    let reopened = KnowledgeBase::open(dir.path(), e.clone()).unwrap();
    let after = reopened.list();
    assert_eq!(before.len(), after.len());
    for (x, y) in before.iter().zip(&after) {
        assert_eq!((&x.id, &x.title, x.kind, &x.body, &x.refs), (&y.id, &y.title, y.kind, &y.body, &y.refs));
        let (vx, vy) = (x.embedding.as_ref().unwrap(), y.embedding.as_ref().unwrap());
        assert!(vx.iter().zip(vy).all(|(p, q)| (p - q).abs() < 1e-6));
        assert!((norm(vy) - 1.0).abs() < 1e-9);
    }
    assert_eq!(after[1].refs, ["storage-api", "coding-guide"]);
    let lint = reopened.lint();
    assert_eq!(lint.len(), 1);
    assert_eq!(lint[0].doc, "vna-api");
    assert_eq!(lint[0].dangling, ["storage-api"]);

    std::fs::remove_file(dir.path().join("embeddings.halv")).unwrap();
    let rebuilt = KnowledgeBase::open(dir.path(), e).unwrap();
    assert_eq!(rebuilt.get("vna-api").unwrap().embedding, before[1].embedding);
    assert!(dir.path().join("embeddings.halv").exists());
}

#[test]
fn ids_are_unique_and_validated() {
    let kb = KnowledgeBase::in_memory(Arc::new(HashEmbedder::default()));
    let input = DocInput {
        id: None,
        title: "QND plan".into(),
        kind: Some(DocKind::Plan),
        body: "Measure leakage.".into(),
        refs: vec![],
    };
    let a = kb.add(input.clone()).unwrap();
    let b = kb.add(input.clone()).unwrap();
    assert_ne!(a, b);
    assert!(matches!(
        kb.add(DocInput { id: Some(a.clone()), ..input.clone() }),
        Err(KbError::DuplicateId(_))
    ));
    assert!(matches!(
        kb.add(DocInput { id: Some("../x".into()), ..input.clone() }),
        Err(KbError::InvalidId(_))
    ));
    assert!(matches!(kb.add(DocInput { body: " ".into(), ..input }), Err(KbError::EmptyText)));
}

#[test]
fn file_format_parsing() {
    let doc = Document::parse("id: a\ntitle: A doc\nkind: example\nrefs: b, c\n\nBody [[d]] and [[b]].\n\nMore.").unwrap();
    assert_eq!(doc.refs, ["b", "c", "d"]);
    assert_eq!(doc.body, "Body [[d]] and [[b]].\n\nMore.");
    assert_eq!(Document::parse(&doc.to_file_text()).unwrap(), doc);
    assert!(Document::parse("title: x\nkind: plan\n\nbody").is_err());
    assert!(Document::parse("id: x\ntitle: x\nkind: poem\n\nbody").is_err());
    assert_eq!(body_refs("[[a]] [[not an id]] [[a]] [[b-1.2]]"), ["a", "b-1.2"]);
}

#[test]
fn embedder_registry() {
    let r = EmbedderRegistry::standard();
    assert_eq!(r.names().collect::<Vec<_>>(), ["hash", "remote"]);
    let e = r.create("hash", 64).unwrap();
    assert_eq!(e.embed("x").unwrap().len(), 64);
    assert!(r.create("nope", 64).is_err());
}
