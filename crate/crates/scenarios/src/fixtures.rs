//! Fixture files compiled into the crate, keyed by their path under `fixtures/`.

pub(crate) static FILES: &[(&str, &str)] = &[
    ("kb/analysis-api.doc", include_str!("../fixtures/kb/analysis-api.doc")),
    ("kb/coding-guide.doc", include_str!("../fixtures/kb/coding-guide.doc")),
    ("kb/leakage-model.doc", include_str!("../fixtures/kb/leakage-model.doc")),
    ("kb/power-sweep-plan.doc", include_str!("../fixtures/kb/power-sweep-plan.doc")),
    ("kb/qnd-plan.doc", include_str!("../fixtures/kb/qnd-plan.doc")),
    ("kb/qubit-api.doc", include_str!("../fixtures/kb/qubit-api.doc")),
    ("kb/resonator-plan.doc", include_str!("../fixtures/kb/resonator-plan.doc")),
    ("kb/storage-api.doc", include_str!("../fixtures/kb/storage-api.doc")),
    ("kb/sweep-example.doc", include_str!("../fixtures/kb/sweep-example.doc")),
    ("kb/vna-api.doc", include_str!("../fixtures/kb/vna-api.doc")),
    ("knowledge/rilb-lab-independent.txt", include_str!("../fixtures/knowledge/rilb-lab-independent.txt")),
    ("labs/empty.toml", include_str!("../fixtures/labs/empty.toml")),
    ("labs/power-single.toml", include_str!("../fixtures/labs/power-single.toml")),
    ("labs/power.toml", include_str!("../fixtures/labs/power.toml")),
    ("labs/qnd-control.toml", include_str!("../fixtures/labs/qnd-control.toml")),
    ("labs/qnd.toml", include_str!("../fixtures/labs/qnd.toml")),
    ("labs/resonator.toml", include_str!("../fixtures/labs/resonator.toml")),
    ("scenarios.toml", include_str!("../fixtures/scenarios.toml")),
    ("transcripts/power-sweep.txt", include_str!("../fixtures/transcripts/power-sweep.txt")),
    ("transcripts/qnd-prepared.txt", include_str!("../fixtures/transcripts/qnd-prepared.txt")),
    ("transcripts/qnd.txt", include_str!("../fixtures/transcripts/qnd.txt")),
    ("transcripts/resonator-empty.txt", include_str!("../fixtures/transcripts/resonator-empty.txt")),
    ("transcripts/resonator-wide.txt", include_str!("../fixtures/transcripts/resonator-wide.txt")),
    ("transcripts/resonator.txt", include_str!("../fixtures/transcripts/resonator.txt")),
];

pub fn fixture(path: &str) -> Option<&'static str> {
    FILES.iter().find(|(p, _)| *p == path).map(|(_, text)| *text)
}

/// Paths of every fixture under `dir/`.
pub fn fixtures_in(dir: &str) -> impl Iterator<Item = &'static str> + '_ {
    FILES.iter().map(|(p, _)| *p).filter(move |p| p.strip_prefix(dir).is_some_and(|r| r.starts_with('/')))
}
