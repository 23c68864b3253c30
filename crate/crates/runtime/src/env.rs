use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use hal_virtlab::{Lab, Storage};

use crate::ast::Program;
use crate::builtins::{BuiltinRegistry, Group};
use crate::error::{Fault, RegistryError, RuntimeError, SyntaxError};
use crate::interp::Interpreter;
use crate::parser::parse;
use crate::value::Value;

/// STATE key behind the `SIGNAL` variable.
pub const SIGNAL_KEY: &str = "__signal__";

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub source: String,
    pub program: Program,
}

impl Script {
    pub fn parse(source: impl Into<String>) -> Result<Self, SyntaxError> {
        let source = source.into();
        let program = parse(&source)?;
        Ok(Self { source, program })
    }

    /// Whether the script assigns `SIGNAL` anywhere.
    pub fn assigns_signal(&self) -> bool {
        use crate::ast::{Stmt, Target};
        fn any(body: &[Stmt]) -> bool {
            body.iter().any(|s| match s {
                Stmt::Assign { target: Target::Signal, .. } => true,
                Stmt::If { branches, otherwise, .. } => {
                    branches.iter().any(|(_, b)| any(b)) || otherwise.as_deref().is_some_and(any)
                }
                Stmt::While { body, .. } | Stmt::For { body, .. } => any(body),
                _ => false,
            })
        }
        any(&self.program.body)
    }

    /// Names of every builtin called anywhere in the script.
    pub fn called_builtins(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_calls(&mut |name, _| {
            out.insert(name.to_string());
        });
        out
    }

    /// Literal string ids passed to `invoke`.
    pub fn invoked_ids(&self) -> BTreeSet<String> {
        use crate::ast::Expr;
        let mut out = BTreeSet::new();
        self.visit_calls(&mut |name, args| {
            if let ("invoke", [Expr::Str(id)]) = (name, args) {
                out.insert(id.clone());
            }
        });
        out
    }

    fn visit_calls(&self, f: &mut dyn FnMut(&str, &[crate::ast::Expr])) {
        use crate::ast::{Expr, Stmt, Target};
        fn expr(e: &Expr, f: &mut dyn FnMut(&str, &[Expr])) {
            match e {
                Expr::Call { name, args, .. } => {
                    f(name, args);
                    args.iter().for_each(|a| expr(a, f));
                }
                Expr::List(items) => items.iter().for_each(|a| expr(a, f)),
                Expr::Map(entries) => entries.iter().for_each(|(_, a)| expr(a, f)),
                Expr::Index { target, index, .. } => {
                    expr(target, f);
                    expr(index, f);
                }
                Expr::Unary { expr: inner, .. } => expr(inner, f),
                Expr::Binary { lhs, rhs, .. } => {
                    expr(lhs, f);
                    expr(rhs, f);
                }
                _ => {}
            }
        }
        fn block(body: &[Stmt], f: &mut dyn FnMut(&str, &[Expr])) {
            for s in body {
                match s {
                    Stmt::Assign { target, value, .. } => {
                        if let Target::Index { path, .. } = target {
                            path.iter().for_each(|e| expr(e, f));
                        }
                        expr(value, f);
                    }
                    Stmt::Expr(e, _) => expr(e, f),
                    Stmt::If { branches, otherwise, .. } => {
                        for (c, b) in branches {
                            expr(c, f);
                            block(b, f);
                        }
                        if let Some(b) = otherwise {
                            block(b, f);
                        }
                    }
                    Stmt::While { cond, body, .. } => {
                        expr(cond, f);
                        block(body, f);
                    }
                    Stmt::For { iter, body, .. } => {
                        expr(iter, f);
                        block(body, f);
                    }
                }
            }
        }
        block(&self.program.body, f);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_steps: u64,
    pub max_wall: Duration,
    pub max_invoke_depth: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_steps: 2_000_000,
            max_wall: Duration::from_millis(60_000),
            max_invoke_depth: 8,
        }
    }
}

/// Looks up script source for ids not in the session registry,
/// e.g. knowledge-base examples.
pub trait ScriptResolver: Send + Sync {
    fn resolve(&self, id: &str) -> Option<String>;
}

/// Connections to the outside world available to builtins.
#[derive(Clone, Default)]
pub struct Host {
    pub lab: Option<Arc<dyn Lab>>,
    pub storage: Option<Storage>,
    pub session: String,
    pub resolver: Option<Arc<dyn ScriptResolver>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub signal: Option<String>,
    pub log: Vec<String>,
    pub error: Option<RuntimeError>,
    pub steps_used: u64,
}

impl ExecutionResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

pub struct Environment {
    pub(crate) state: Arc<BTreeMap<String, Value>>,
    pub(crate) registry: BTreeMap<String, Script>,
    pub(crate) capabilities: BTreeSet<Group>,
    pub(crate) budget: Budget,
    pub(crate) host: Host,
    pub(crate) builtins: Arc<BuiltinRegistry>,
}

impl Default for Environment {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment {
    /// An environment with every capability group enabled and no host connections.
    pub fn new() -> Self {
        Self::with_host(Host::default())
    }

    pub fn with_host(host: Host) -> Self {
        Self {
            state: Arc::default(),
            registry: BTreeMap::new(),
            capabilities: Group::ALL.into_iter().collect(),
            budget: Budget::default(),
            host,
            builtins: Arc::new(BuiltinRegistry::standard()),
        }
    }

    pub fn host(&self) -> &Host {
        &self.host
    }

    pub fn host_mut(&mut self) -> &mut Host {
        &mut self.host
    }

    pub fn builtins(&self) -> &BuiltinRegistry {
        &self.builtins
    }

    pub fn set_builtins(&mut self, registry: BuiltinRegistry) {
        self.builtins = Arc::new(registry);
    }

    pub fn capabilities(&self) -> &BTreeSet<Group> {
        &self.capabilities
    }

    pub fn set_capabilities(&mut self, groups: impl IntoIterator<Item = Group>) {
        self.capabilities = groups.into_iter().collect();
    }

    pub fn disable(&mut self, group: Group) {
        self.capabilities.remove(&group);
    }

    pub fn enable(&mut self, group: Group) {
        self.capabilities.insert(group);
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    pub fn set_budget(&mut self, budget: Budget) {
        self.budget = budget;
    }

    pub fn state(&self) -> &BTreeMap<String, Value> {
        &self.state
    }

    pub fn snapshot_state(&self) -> BTreeMap<String, Value> {
        (*self.state).clone()
    }

    /// STATE as a JSON object.
    pub fn state_json(&self) -> serde_json::Value {
        Value::Map(Arc::clone(&self.state)).to_json()
    }

    /// Shallow merge: top-level keys in `patch` overwrite.
    pub fn patch_state(&mut self, patch: BTreeMap<String, Value>) -> Result<(), Fault> {
        for (k, v) in &patch {
            if let Some(path) = v.find_non_finite() {
                return Err(Fault::type_error(format!("non-finite number in STATE[{k:?}]{path}")));
            }
        }
        Arc::make_mut(&mut self.state).extend(patch);
        Ok(())
    }

    pub fn register(&mut self, id: impl Into<String>, script: Script) -> Result<(), RegistryError> {
        let id = id.into();
        if id.is_empty() {
            return Err(RegistryError::EmptyId);
        }
        if self.registry.contains_key(&id) {
            return Err(RegistryError::Duplicate(id));
        }
        self.registry.insert(id, script);
        Ok(())
    }

    pub fn registered(&self, id: &str) -> Option<&Script> {
        self.registry.get(id)
    }

    pub fn registered_ids(&self) -> impl Iterator<Item = &str> {
        self.registry.keys().map(String::as_str)
    }

    /// Run `script` against this environment. STATE changes made before an
    /// error are kept. The signal is read from and then removed from STATE.
    pub fn execute(&mut self, script: &Script) -> ExecutionResult {
        let mut interp = Interpreter::new(self);
        let error = interp.run_top(&script.program).err();
        let (steps_used, log) = interp.finish();
        let signal = Arc::make_mut(&mut self.state)
            .remove(SIGNAL_KEY)
            .map(|v| v.to_string());
        ExecutionResult {
            signal,
            log,
            error,
            steps_used,
        }
    }
}
