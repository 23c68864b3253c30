//! The plan/develop/execute cycle over a session.

mod prompts;
mod session;

use std::collections::BTreeMap;
use std::sync::Arc;

use hal_runtime::{Environment, Fault, Host, Script, ScriptResolver, Value};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::events::{EventKind, EventLog};
use crate::kb::{fenced_block, iterative_search, DocInput, DocKind, Document, KbError, KnowledgeBase, SearchConfig, SearchPurpose};
use crate::model::{ModelAdapter, ModelError, ModelRequest, Role, Thinking};

pub use session::{digest, replay, CycleRecord, Mode, Session, Status};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("{role} reply not understood: {message}")]
    Protocol { role: Role, message: String, reply: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("session is done; send new input to continue")]
    SessionDone,
    #[error("cycle {0} is waiting for approval")]
    PendingApproval(usize),
    #[error("cycle {0} is not waiting for approval")]
    NotPending(usize),
    #[error("no cycle {0}")]
    UnknownStep(usize),
    #[error("cannot memorize: {0}")]
    Memorize(String),
    #[error("session reached the limit of {0} cycles")]
    CycleLimit(usize),
    #[error("state patch rejected: {0}")]
    State(#[from] Fault),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub search: SearchConfig,
    pub develop_retries: usize,
    /// Cycles whose full script source appears in the planner's history.
    pub full_script_cycles: usize,
    pub max_cycles: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            develop_retries: 2,
            full_script_cycles: 3,
            max_cycles: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Preprocessed {
    pub queries: Vec<String>,
    pub commands: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Answer {
    pub text: String,
    pub documents: Vec<String>,
    pub no_documents: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanReply {
    pub prompt: String,
    pub signal_description: String,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Developed {
    pub script: Script,
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no valid script after {attempts} attempts: {error}")]
pub struct DevelopError {
    pub attempts: usize,
    pub error: String,
    pub last_source: String,
}

/// What one call to [`Engine::run_cycle`] produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleReport {
    pub answers: Vec<(String, Answer)>,
    pub record: Option<CycleRecord>,
    pub done: bool,
}

/// Resolves `invoke` ids against code blocks of knowledge-base documents.
pub struct KbResolver(pub Arc<KnowledgeBase>);

impl ScriptResolver for KbResolver {
    fn resolve(&self, id: &str) -> Option<String> {
        self.0.get(id).and_then(|d| d.code_block())
    }
}

/// Split text into sentences at `.`, `?` or `!` followed by whitespace, and at line breaks.
pub fn split_sentences(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\n' {
            out.push(std::mem::take(&mut current));
            continue;
        }
        current.push(c);
        if matches!(c, '.' | '?' | '!') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            out.push(std::mem::take(&mut current));
        }
    }
    out.push(current);
    out.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn parse_preprocess(reply: &str, sentences: &[String]) -> Result<Preprocessed, String> {
    let mut labels: Vec<Option<bool>> = vec![None; sentences.len()];
    for line in reply.lines() {
        let t = line.trim().trim_start_matches(['-', '*']).trim();
        let digits: String = t.chars().take_while(char::is_ascii_digit).collect();
        if digits.is_empty() {
            continue;
        }
        let rest = t[digits.len()..].trim_start_matches([':', '.', ')', ' ']).trim().to_ascii_lowercase();
        let is_command = if rest.starts_with("command") {
            true
        } else if rest.starts_with("query") {
            false
        } else {
            continue;
        };
        let n: usize = digits.parse().map_err(|_| format!("bad sentence number {digits}"))?;
        let slot = labels
            .get_mut(n.wrapping_sub(1))
            .ok_or_else(|| format!("sentence {n} does not exist"))?;
        if slot.replace(is_command).is_some() {
            return Err(format!("sentence {n} classified twice"));
        }
    }
    let mut out = Preprocessed::default();
    for (i, (label, s)) in labels.into_iter().zip(sentences).enumerate() {
        match label {
            Some(true) => out.commands.push(s.clone()),
            Some(false) => out.queries.push(s.clone()),
            None => return Err(format!("sentence {} was not classified", i + 1)),
        }
    }
    Ok(out)
}

fn parse_plan(reply: &str) -> Result<PlanReply, String> {
    let mut lines = reply.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().ok_or("empty planner reply")?.trim();
    if first.eq_ignore_ascii_case("DONE") || first.to_ascii_uppercase().starts_with("DONE ") {
        return Ok(PlanReply {
            prompt: String::new(),
            signal_description: String::new(),
            done: true,
        });
    }
    let description = first
        .strip_prefix("SIGNAL:")
        .or_else(|| first.strip_prefix("Signal:"))
        .ok_or_else(|| format!("first line must be DONE or SIGNAL: <description>, got {first:?}"))?
        .trim()
        .to_string();
    if description.is_empty() {
        return Err("empty signal description".into());
    }
    let prompt = lines.collect::<Vec<_>>().join("\n").trim().to_string();
    if prompt.is_empty() {
        return Err("no prompt after the SIGNAL line".into());
    }
    Ok(PlanReply {
        prompt,
        signal_description: description,
        done: false,
    })
}

pub struct Engine {
    kb: Arc<KnowledgeBase>,
    model: Arc<dyn ModelAdapter>,
    pub config: EngineConfig,
}

impl Engine {
    pub fn new(kb: Arc<KnowledgeBase>, model: Arc<dyn ModelAdapter>) -> Self {
        Self {
            kb,
            model,
            config: EngineConfig::default(),
        }
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn model(&self) -> &Arc<dyn ModelAdapter> {
        &self.model
    }

    /// A session whose `invoke` also reaches knowledge-base examples.
    pub fn new_session(&self, id: impl Into<String>, mode: Mode, mut host: Host, events: Arc<EventLog>) -> Session {
        let id = id.into();
        if host.session.is_empty() {
            host.session = id.clone();
        }
        if host.resolver.is_none() {
            host.resolver = Some(Arc::new(KbResolver(Arc::clone(&self.kb))));
        }
        Session::new(id, mode, Environment::with_host(host), events)
    }

    fn search(&self, task: &str, purpose: SearchPurpose) -> Result<Vec<Document>, EngineError> {
        Ok(iterative_search(&self.kb, task, self.model.as_ref(), purpose, self.config.search)?.documents)
    }

    fn protocol(role: Role, message: impl Into<String>, reply: &str) -> EngineError {
        EngineError::Protocol {
            role,
            message: message.into(),
            reply: reply.to_string(),
        }
    }

    /// Separate questions from commands, sentence by sentence.
    pub fn preprocess(&self, raw: &str) -> Result<Preprocessed, EngineError> {
        let sentences = split_sentences(raw);
        if sentences.is_empty() {
            return Err(EngineError::InvalidInput("input is empty".into()));
        }
        let numbered: Vec<String> = sentences.iter().enumerate().map(|(i, s)| format!("{}. {s}", i + 1)).collect();
        let request = ModelRequest::new(
            Role::Preprocess,
            format!("{}\n\nMessage:\n{}", prompts::PREPROCESS, numbered.join("\n")),
        );
        let reply = self.model.generate(&request)?;
        parse_preprocess(&reply, &sentences).map_err(|m| Self::protocol(Role::Preprocess, m, &reply))
    }

    /// Knowledge-grounded reply to a question. Does not touch any session.
    pub fn answer(&self, query: &str, thinking: Thinking) -> Result<Answer, EngineError> {
        if query.trim().is_empty() {
            return Err(EngineError::InvalidInput("question is empty".into()));
        }
        let docs = self.search(query, SearchPurpose::Answer)?;
        let no_documents = docs.is_empty();
        let mut instructions = format!("{}\n\nQuestion:\n{}", prompts::ANSWER, query.trim());
        if no_documents {
            instructions = format!("{instructions}\n\n{}", prompts::NO_DOCUMENTS);
        }
        let documents = docs.iter().map(|d| d.id.clone()).collect();
        let request = ModelRequest::new(Role::Answer, instructions)
            .with_documents(docs)
            .with_thinking(thinking);
        Ok(Answer {
            text: self.model.generate(&request)?,
            documents,
            no_documents,
        })
    }

    /// Ask the planner for the next step.
    pub fn plan(&self, session: &Session, user_input: Option<&str>) -> Result<PlanReply, EngineError> {
        let goal = session
            .history
            .iter()
            .find_map(|r| r.user_input.clone())
            .or_else(|| user_input.map(str::to_string))
            .unwrap_or_default();
        let task = match user_input {
            Some(input) if input != goal => format!("{goal}\n{input}"),
            _ => goal.clone(),
        };
        let docs = self.search(&task, SearchPurpose::Plan)?;
        let instructions = format!(
            "{}\n\nSession goal:\n{}\n\nNew user input:\n{}",
            prompts::PLAN,
            if goal.is_empty() { "(none)" } else { &goal },
            user_input.unwrap_or("(none)"),
        );
        let request = ModelRequest::new(Role::Plan, instructions)
            .with_documents(docs)
            .with_history(digest(&session.history, self.config.full_script_cycles));
        let reply = self.model.generate(&request)?;
        parse_plan(&reply).map_err(|m| Self::protocol(Role::Plan, m, &reply))
    }

    /// Builtins, STATE keys and registered steps visible to the developer.
    pub fn runtime_info(&self, env: &Environment) -> String {
        let mut out = String::from("Builtins:\n  invoke(id): run a registered step or knowledge-base example in the same STATE\n");
        for b in env.builtins().iter().filter(|b| env.capabilities().contains(&b.group())) {
            out.push_str(&format!("  {}: {}\n", b.signature(), b.summary()));
        }
        out.push_str("STATE keys:\n");
        if env.state().is_empty() {
            out.push_str("  (empty)\n");
        }
        for (k, v) in env.state() {
            let shown = match v {
                Value::List(l) => format!("list of {}", l.len()),
                Value::Map(m) => format!("map with {} keys", m.len()),
                other => other.to_string(),
            };
            out.push_str(&format!("  {k}: {shown}\n"));
        }
        let steps: Vec<&str> = env.registered_ids().collect();
        out.push_str(&format!(
            "Registered steps: {}\n",
            if steps.is_empty() { "(none)".to_string() } else { steps.join(", ") }
        ));
        out
    }

    /// Ask the developer for a script, re-prompting with the error when the
    /// reply does not parse or never assigns SIGNAL.
    pub fn develop(
        &self,
        prompt: &str,
        signal_description: &str,
        env: &Environment,
    ) -> Result<Result<Developed, DevelopError>, EngineError> {
        if prompt.trim().is_empty() {
            return Err(EngineError::InvalidInput("prompt is empty".into()));
        }
        let docs = self.search(prompt, SearchPurpose::Develop)?;
        let base = format!(
            "{}\n\nPrompt:\n{}\n\nSIGNAL should report: {}\n\nRuntime:\n{}",
            prompts::DEVELOP,
            prompt,
            signal_description,
            self.runtime_info(env)
        );
        let mut feedback = String::new();
        let attempts = self.config.develop_retries + 1;
        for attempt in 0..attempts {
            let request = ModelRequest::new(Role::Develop, format!("{base}{feedback}")).with_documents(docs.clone());
            let reply = self.model.generate(&request)?;
            let source = fenced_block(&reply).unwrap_or_else(|| reply.trim().to_string());
            let error = match Script::parse(source.clone()) {
                Ok(script) if script.assigns_signal() => {
                    return Ok(Ok(Developed {
                        script,
                        retries: attempt,
                    }))
                }
                Ok(_) => "the script never assigns SIGNAL".to_string(),
                Err(e) => e.to_string(),
            };
            if attempt + 1 == attempts {
                return Ok(Err(DevelopError {
                    attempts,
                    error,
                    last_source: source,
                }));
            }
            feedback = format!("\n\nYour previous script was rejected: {error}\nPrevious script:\n{source}");
        }
        unreachable!("loop returns on its last attempt")
    }

    /// One cycle: optional input (queries answered, commands kept), plan,
    /// develop, and in auto mode execute.
    pub fn run_cycle(&self, session: &mut Session, input: Option<&str>) -> Result<CycleReport, EngineError> {
        let out = self.run_cycle_inner(session, input);
        if let Err(e) = &out {
            if !matches!(e, EngineError::PendingApproval(_) | EngineError::SessionDone) {
                session.emit(EventKind::Error, json!({"cycle": null, "message": e.to_string()}));
            }
        }
        out
    }

    fn run_cycle_inner(&self, session: &mut Session, input: Option<&str>) -> Result<CycleReport, EngineError> {
        if let Some(p) = session.pending() {
            return Err(EngineError::PendingApproval(p));
        }
        let mut report = CycleReport::default();
        let mut user_input = None;
        match input.map(str::trim).filter(|s| !s.is_empty()) {
            Some(raw) => {
                session.emit(EventKind::UserInput, json!({"text": raw}));
                let pre = self.preprocess(raw)?;
                for q in pre.queries {
                    let a = self.answer(&q, Thinking::Low)?;
                    session.emit(
                        EventKind::QueryAnswer,
                        json!({"query": q, "answer": a.text, "documents": a.documents, "no_documents": a.no_documents}),
                    );
                    report.answers.push((q, a));
                }
                if pre.commands.is_empty() {
                    report.done = session.done;
                    return Ok(report);
                }
                session.done = false;
                user_input = Some(pre.commands.join(" "));
            }
            None if session.done => return Err(EngineError::SessionDone),
            None => {}
        }
        if session.history.len() >= self.config.max_cycles {
            return Err(EngineError::CycleLimit(self.config.max_cycles));
        }
        let plan = self.plan(session, user_input.as_deref())?;
        if plan.done {
            session.done = true;
            session.emit(EventKind::Done, json!({"after_cycle": session.history.len()}));
            report.done = true;
            return Ok(report);
        }
        let index = session.history.len() + 1;
        let mut record = CycleRecord {
            index,
            user_input,
            prompt: plan.prompt,
            signal_description: plan.signal_description,
            script_source: String::new(),
            signal_value: None,
            status: Status::Planned,
            retries: 0,
        };
        session.emit(EventKind::Plan, session::plan_payload(&record));
        session.history.push(record.clone());

        match self.develop(&record.prompt, &record.signal_description, &session.env)? {
            Ok(dev) => {
                record.script_source = dev.script.source;
                record.retries = dev.retries;
                record.status = match session.mode {
                    Mode::Auto => Status::Developed,
                    Mode::Manual => Status::PendingApproval,
                };
                session.emit(EventKind::Code, session::code_payload(&record));
                *session.record_mut(index).expect("just pushed") = record;
                if session.mode == Mode::Auto {
                    self.execute(session, index);
                }
            }
            Err(fail) => {
                record.script_source = fail.last_source.clone();
                record.retries = fail.attempts - 1;
                record.status = Status::Failed;
                let value = format!("develop error: {}", fail.error);
                record.signal_value = Some(value.clone());
                session.emit(EventKind::Code, session::code_payload(&record));
                session.emit(EventKind::Error, json!({"cycle": index, "value": value, "kind": "develop"}));
                *session.record_mut(index).expect("just pushed") = record;
            }
        }
        report.record = session.record(index).cloned();
        Ok(report)
    }

    fn execute(&self, session: &mut Session, index: usize) {
        let source = session.record(index).expect("cycle exists").script_source.clone();
        let script = Script::parse(source).expect("developed scripts parse");
        let _ = session.env.register(format!("step-{index}"), script.clone());
        session.emit(EventKind::ExecutionStarted, json!({"cycle": index}));
        let result = session.env.execute(&script);
        let (value, status) = match &result.error {
            None => {
                let value = result.signal.clone().unwrap_or_else(|| "(no signal)".to_string());
                session.emit(
                    EventKind::Signal,
                    json!({"cycle": index, "value": value, "log": result.log, "steps": result.steps_used}),
                );
                (value, Status::Executed)
            }
            Some(err) => {
                let value = format!("runtime error: {err}");
                session.emit(
                    EventKind::Error,
                    json!({
                        "cycle": index,
                        "value": value,
                        "kind": err.kind.as_str(),
                        "line": err.line,
                        "message": err.message,
                        "partial_signal": result.signal,
                        "log": result.log,
                    }),
                );
                (value, Status::Failed)
            }
        };
        let r = session.record_mut(index).expect("cycle exists");
        r.signal_value = Some(value);
        r.status = status;
    }

    /// Run a cycle held in manual mode.
    pub fn approve(&self, session: &mut Session, index: usize) -> Result<CycleRecord, EngineError> {
        let record = session.record(index).ok_or(EngineError::UnknownStep(index))?;
        if record.status != Status::PendingApproval {
            return Err(EngineError::NotPending(index));
        }
        self.execute(session, index);
        Ok(session.record(index).cloned().expect("cycle exists"))
    }

    /// Run cycles until one waits for approval, the planner is done, or there
    /// is nothing to do. Queued inputs are consumed one per cycle.
    pub fn advance(&self, session: &mut Session) -> Result<Vec<CycleReport>, EngineError> {
        let mut reports = Vec::new();
        loop {
            if session.pending().is_some() {
                break;
            }
            let input = session.inbox.pop_front();
            if input.is_none() && (session.done || session.history.is_empty()) {
                break;
            }
            reports.push(self.run_cycle(session, input.as_deref())?);
        }
        Ok(reports)
    }

    /// Operator-supplied STATE entries, logged as a state_patch event.
    pub fn patch_state(&self, session: &mut Session, patch: BTreeMap<String, Value>) -> Result<(), EngineError> {
        let payload: serde_json::Map<String, serde_json::Value> =
            patch.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        session.env.patch_state(patch)?;
        session.emit(EventKind::StatePatch, json!({"patch": payload}));
        Ok(())
    }

    /// Store a successful cycle as a code example.
    pub fn memorize(&self, session: &Session, index: usize, title: &str) -> Result<String, EngineError> {
        let r = session
            .record(index)
            .ok_or_else(|| EngineError::Memorize(format!("no cycle {index}")))?;
        if r.status != Status::Executed {
            return Err(EngineError::Memorize(format!("cycle {index} is {}, not executed", r.status)));
        }
        let body = format!(
            "Prompt: {}\n\nExpected signal: {}\n\nObserved signal: {}\n\n```hal\n{}\n```\n",
            r.prompt,
            r.signal_description,
            r.signal_value.as_deref().unwrap_or(""),
            r.script_source.trim_end()
        );
        Ok(self.kb.add(DocInput {
            id: None,
            title: title.to_string(),
            kind: Some(DocKind::Example),
            body,
            refs: Vec::new(),
        })?)
    }

    /// Turn lab-independent instructions into a lab-specific plan document.
    pub fn prepare_knowledge(&self, lab_independent: &str, leading_prompt: &str) -> Result<String, EngineError> {
        if lab_independent.trim().is_empty() || leading_prompt.trim().is_empty() {
            return Err(EngineError::InvalidInput("both texts must be non-empty".into()));
        }
        let docs = self.search(leading_prompt, SearchPurpose::Answer)?;
        let request = ModelRequest::new(
            Role::Answer,
            format!(
                "{}\n\nRequest:\n{}\n\nLab-independent instructions:\n{}",
                prompts::PREPARE,
                leading_prompt.trim(),
                lab_independent.trim()
            ),
        )
        .with_documents(docs)
        .with_thinking(Thinking::High);
        let reply = self.model.generate(&request)?;
        if reply.trim().is_empty() {
            return Err(Self::protocol(Role::Answer, "empty plan document", &reply));
        }
        let first = reply.lines().find(|l| !l.trim().is_empty()).unwrap_or_default().trim();
        let title = match first.strip_prefix("# ") {
            Some(t) => t.trim().to_string(),
            None => leading_prompt.trim().chars().take(80).collect(),
        };
        Ok(self.kb.add(DocInput {
            id: None,
            title,
            kind: Some(DocKind::Plan),
            body: reply,
            refs: Vec::new(),
        })?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentences() {
        assert_eq!(split_sentences("what is Qc? then measure resonator 3"), ["what is Qc?", "then measure resonator 3"]);
        assert_eq!(split_sentences("sweep 4.5 GHz. done!\nnext"), ["sweep 4.5 GHz.", "done!", "next"]);
        assert!(split_sentences("  \n ").is_empty());
    }

    #[test]
    fn preprocess_reply() {
        let s = split_sentences("a? b.");
        let p = parse_preprocess("Sure.\n1: query\n2: Command\n", &s).unwrap();
        assert_eq!(p.queries, ["a?"]);
        assert_eq!(p.commands, ["b."]);
        assert!(parse_preprocess("1: query", &s).is_err());
        assert!(parse_preprocess("1: query\n1: command\n2: query", &s).is_err());
        assert!(parse_preprocess("1: query\n2: query\n3: query", &s).is_err());
    }

    #[test]
    fn plan_reply() {
        assert!(parse_plan("\nDONE\n").unwrap().done);
        let p = parse_plan("SIGNAL: number of found resonators\nAnalyze the sweep.\nUse find_resonances.").unwrap();
        assert_eq!(p.signal_description, "number of found resonators");
        assert_eq!(p.prompt, "Analyze the sweep.\nUse find_resonances.");
        assert!(parse_plan("").is_err());
        assert!(parse_plan("SIGNAL: x").is_err());
        assert!(parse_plan("Do something").is_err());
    }
}
