//! Static checks over shipped transcripts.

use std::collections::{BTreeMap, BTreeSet};

use hal_core::kb::{fenced_block, slug};
use hal_core::model::{Role, ScriptedModel};
use hal_runtime::{BuiltinRegistry, Group, Script};

use crate::bundle::ScenarioBundle;

/// Builtins whose results count or fit data, as opposed to acquiring it.
pub const ANALYSIS_BUILTINS: &[&str] = &["find_resonances", "fit_leakage"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintIssue {
    pub scenario: String,
    /// Cycle index of the offending developer reply, when there is one.
    pub step: Option<usize>,
    pub message: String,
}

/// Developer replies of a transcript, in order, as parsed scripts.
pub fn develop_scripts(transcript: &ScriptedModel) -> Vec<Result<Script, String>> {
    transcript
        .entries()
        .into_iter()
        .filter(|e| e.role == Role::Develop)
        .map(|e| {
            let source = fenced_block(&e.reply).unwrap_or_else(|| e.reply.trim().to_string());
            Script::parse(source).map_err(|err| err.to_string())
        })
        .collect()
}

/// Builtins a step calls, following `invoke` into earlier steps.
fn closure(step: usize, scripts: &BTreeMap<usize, Script>, seen: &mut BTreeSet<usize>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if !seen.insert(step) {
        return out;
    }
    if let Some(s) = scripts.get(&step) {
        out.extend(s.called_builtins());
        for id in s.invoked_ids() {
            if let Some(n) = id.strip_prefix("step-").and_then(|n| n.parse().ok()) {
                out.extend(closure(n, scripts, seen));
            }
        }
    }
    out
}

/// Parse and signal checks, invoke targets, document references and the
/// rule that no step both talks to the lab and counts or fits the data it got.
pub fn lint_bundle(bundle: &ScenarioBundle) -> Vec<LintIssue> {
    let issue = |step: Option<usize>, message: String| LintIssue {
        scenario: bundle.name.clone(),
        step,
        message,
    };
    let model = match bundle.model() {
        Ok(m) => m,
        Err(e) => return vec![issue(None, format!("transcript does not parse: {e}"))],
    };
    let mut issues = Vec::new();

    let mut known: BTreeSet<String> = bundle.kb_docs.iter().map(|d| d.id.clone()).collect();
    if bundle.prepare.is_some() {
        for e in model.entries().iter().filter(|e| e.role == Role::Answer) {
            if let Some(title) = e.reply.lines().find_map(|l| l.trim().strip_prefix("# ")) {
                known.insert(slug(title));
            }
        }
    }
    for e in model.entries() {
        if let Some(id) = e.matcher.strip_prefix("### ") {
            if !known.contains(id.trim()) {
                issues.push(issue(None, format!("transcript expects document {id:?}, which the bundle lacks")));
            }
        }
    }

    let registry = BuiltinRegistry::standard();
    let lab: BTreeSet<String> = registry
        .iter()
        .filter(|b| b.group() == Group::Lab)
        .map(|b| b.name().to_string())
        .collect();
    let mut scripts = BTreeMap::new();
    for (i, parsed) in develop_scripts(&model).into_iter().enumerate() {
        let step = i + 1;
        match parsed {
            Ok(s) if s.assigns_signal() => {
                for id in s.invoked_ids() {
                    let earlier = id.strip_prefix("step-").and_then(|n| n.parse::<usize>().ok()).is_some_and(|n| n < step);
                    if !earlier && !known.contains(&id) {
                        issues.push(issue(Some(step), format!("invokes {id:?}, which is neither an earlier step nor a document")));
                    }
                }
                scripts.insert(step, s);
            }
            Ok(_) => issues.push(issue(Some(step), "script never assigns SIGNAL".into())),
            Err(e) => issues.push(issue(Some(step), format!("script does not parse: {e}"))),
        }
    }
    for &step in scripts.keys() {
        let calls = closure(step, &scripts, &mut BTreeSet::new());
        let acquires = calls.iter().any(|c| lab.contains(c));
        let counts: Vec<&str> = ANALYSIS_BUILTINS.iter().copied().filter(|b| calls.contains(*b)).collect();
        if acquires && !counts.is_empty() {
            issues.push(issue(Some(step), format!("acquires data and also calls {}", counts.join(", "))));
        }
    }
    issues
}
