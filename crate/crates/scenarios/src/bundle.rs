use std::sync::Arc;

use hal_core::kb::{DocInput, Document, HashEmbedder, KnowledgeBase};
use hal_core::model::ScriptedModel;
use hal_virtlab::LabConfig;
use serde::Deserialize;

use crate::fixtures::fixture;
use crate::ScenarioError;

/// A user input delivered before the given cycle runs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EntryInput {
    pub cycle: usize,
    pub text: String,
}

/// Knowledge preparation run before the session starts.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Prepare {
    /// Lab-independent instructions, as fixture text.
    pub instructions: String,
    pub prompt: String,
}

/// Tolerances and expected shapes. Ground truth comes from the lab config.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expected {
    pub cycles: Option<usize>,
    pub counts: Option<Vec<usize>>,
    pub fits: Option<usize>,
    pub f_r_rel: Option<f64>,
    pub q_rel: Option<f64>,
    pub sigma_factor: Option<f64>,
    pub sigma_l_max: Option<f64>,
    pub l_max: Option<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub name: String,
    pub kind: String,
    pub description: String,
    pub kb_docs: Vec<Document>,
    pub transcript: String,
    pub transcript_name: String,
    pub lab_config: LabConfig,
    pub entry_inputs: Vec<EntryInput>,
    pub prepare: Option<Prepare>,
    pub expected: Expected,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    kind: String,
    description: String,
    lab: String,
    transcript: String,
    kb: Vec<String>,
    inputs: Vec<EntryInput>,
    prepare: Option<Prepare>,
    #[serde(default)]
    expected: Expected,
}

#[derive(Deserialize)]
struct Manifest {
    scenario: Vec<Entry>,
}

fn required(path: &str) -> Result<&'static str, ScenarioError> {
    fixture(path).ok_or_else(|| ScenarioError::Fixture(format!("missing fixture {path}")))
}

pub fn load_document(id: &str) -> Result<Document, ScenarioError> {
    let doc = Document::parse(required(&format!("kb/{id}.doc"))?)?;
    if doc.id != id {
        return Err(ScenarioError::Fixture(format!("kb/{id}.doc declares id {:?}", doc.id)));
    }
    Ok(doc)
}

pub fn load_lab(file: &str) -> Result<LabConfig, ScenarioError> {
    let config: LabConfig = toml::from_str(required(&format!("labs/{file}"))?)
        .map_err(|e| ScenarioError::Fixture(format!("labs/{file}: {e}")))?;
    config
        .validate()
        .map_err(|e| ScenarioError::Fixture(format!("labs/{file}: {e}")))?;
    Ok(config)
}

/// Every bundle listed in the shipped manifest.
pub fn load_manifest() -> Result<Vec<ScenarioBundle>, ScenarioError> {
    let manifest: Manifest =
        toml::from_str(required("scenarios.toml")?).map_err(|e| ScenarioError::Fixture(format!("scenarios.toml: {e}")))?;
    manifest
        .scenario
        .into_iter()
        .map(|e| {
            let prepare = match e.prepare {
                Some(p) => Some(Prepare {
                    instructions: required(&format!("knowledge/{}", p.instructions))?.to_string(),
                    prompt: p.prompt,
                }),
                None => None,
            };
            Ok(ScenarioBundle {
                kb_docs: e.kb.iter().map(|id| load_document(id)).collect::<Result<_, _>>()?,
                transcript: required(&format!("transcripts/{}", e.transcript))?.to_string(),
                transcript_name: e.transcript,
                lab_config: load_lab(&e.lab)?,
                name: e.name,
                kind: e.kind,
                description: e.description,
                entry_inputs: e.inputs,
                prepare,
                expected: e.expected,
            })
        })
        .collect()
}

impl ScenarioBundle {
    /// A fresh in-memory knowledge base holding the bundle's documents.
    pub fn knowledge_base(&self) -> Result<Arc<KnowledgeBase>, ScenarioError> {
        let kb = KnowledgeBase::in_memory(Arc::new(HashEmbedder::default()));
        for d in &self.kb_docs {
            kb.add(DocInput {
                id: Some(d.id.clone()),
                title: d.title.clone(),
                kind: Some(d.kind),
                body: d.body.clone(),
                refs: d.refs.clone(),
            })?;
        }
        Ok(Arc::new(kb))
    }

    /// A fresh replay of the bundle's transcript.
    pub fn model(&self) -> Result<ScriptedModel, ScenarioError> {
        Ok(ScriptedModel::parse(self.name.clone(), &self.transcript)?)
    }

    pub fn input_for(&self, cycle: usize) -> Option<&str> {
        self.entry_inputs.iter().find(|i| i.cycle == cycle).map(|i| i.text.as_str())
    }
}
