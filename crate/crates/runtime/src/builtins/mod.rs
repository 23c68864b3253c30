//! Builtin functions, grouped by capability.

mod analysis;
mod core;
mod lab;
mod storage;

use std::collections::BTreeMap;

use crate::env::Host;
use crate::error::Fault;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Core,
    Lab,
    Storage,
    Analysis,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Core, Group::Lab, Group::Storage, Group::Analysis];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Core => "core",
            Group::Lab => "lab",
            Group::Storage => "storage",
            Group::Analysis => "analysis",
        }
    }

    pub fn parse(name: &str) -> Option<Group> {
        Group::ALL.into_iter().find(|g| g.as_str() == name)
    }
}

/// What a builtin may touch while it runs.
pub struct CallContext<'a> {
    pub host: &'a Host,
    pub log: &'a mut Vec<String>,
}

pub trait Builtin: Send + Sync {
    fn name(&self) -> &'static str;
    fn group(&self) -> Group;
    /// Call form shown to script authors, e.g. `len(x)`.
    fn signature(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn call(&self, args: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, Fault>;
}

#[derive(Default)]
pub struct BuiltinRegistry {
    entries: BTreeMap<&'static str, Box<dyn Builtin>>,
}

impl BuiltinRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Every shipped builtin.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        core::install(&mut r);
        lab::install(&mut r);
        storage::install(&mut r);
        analysis::install(&mut r);
        r
    }

    /// Add or replace a builtin. `invoke` is reserved.
    pub fn insert(&mut self, b: Box<dyn Builtin>) {
        assert_ne!(b.name(), "invoke", "invoke is handled by the interpreter");
        self.entries.insert(b.name(), b);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Builtin> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Builtin> {
        self.entries.values().map(|b| b.as_ref())
    }

    /// One line per builtin, grouped, for prompts and help text.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for g in Group::ALL {
            out.push_str(&format!("[{}]\n", g.as_str()));
            if g == Group::Core {
                out.push_str("  invoke(id): run a registered script in the same STATE\n");
            }
            for b in self.iter().filter(|b| b.group() == g) {
                out.push_str(&format!("  {}: {}\n", b.signature(), b.summary()));
            }
        }
        out
    }
}

/// A builtin backed by a plain function.
pub(crate) struct FnBuiltin {
    pub name: &'static str,
    pub group: Group,
    pub signature: &'static str,
    pub summary: &'static str,
    pub func: fn(&[Value], &mut CallContext<'_>) -> Result<Value, Fault>,
}

impl Builtin for FnBuiltin {
    fn name(&self) -> &'static str {
        self.name
    }
    fn group(&self) -> Group {
        self.group
    }
    fn signature(&self) -> &'static str {
        self.signature
    }
    fn summary(&self) -> &'static str {
        self.summary
    }
    fn call(&self, args: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, Fault> {
        (self.func)(args, ctx)
    }
}

pub(crate) fn add(
    r: &mut BuiltinRegistry,
    group: Group,
    name: &'static str,
    signature: &'static str,
    summary: &'static str,
    func: fn(&[Value], &mut CallContext<'_>) -> Result<Value, Fault>,
) {
    r.insert(Box::new(FnBuiltin {
        name,
        group,
        signature,
        summary,
        func,
    }));
}

pub(crate) mod args {
    use std::collections::BTreeMap;

    use crate::error::Fault;
    use crate::value::Value;

    pub fn arity(args: &[Value], min: usize, max: usize, sig: &str) -> Result<(), Fault> {
        if args.len() < min || args.len() > max {
            return Err(Fault::type_error(format!("{sig} called with {} arguments", args.len())));
        }
        Ok(())
    }

    pub fn num(v: &Value, what: &str) -> Result<f64, Fault> {
        v.as_f64()
            .ok_or_else(|| Fault::type_error(format!("{what} must be a number, got {}", v.type_name())))
    }

    pub fn int(v: &Value, what: &str) -> Result<i64, Fault> {
        let x = num(v, what)?;
        if x.fract() != 0.0 || x.abs() > 9.0e15 {
            return Err(Fault::type_error(format!("{what} must be an integer, got {x}")));
        }
        Ok(x as i64)
    }

    pub fn count(v: &Value, what: &str) -> Result<usize, Fault> {
        let n = int(v, what)?;
        usize::try_from(n).map_err(|_| Fault::type_error(format!("{what} must be non-negative, got {n}")))
    }

    pub fn text<'a>(v: &'a Value, what: &str) -> Result<&'a str, Fault> {
        v.as_str()
            .ok_or_else(|| Fault::type_error(format!("{what} must be a string, got {}", v.type_name())))
    }

    pub fn list<'a>(v: &'a Value, what: &str) -> Result<&'a [Value], Fault> {
        v.as_list()
            .ok_or_else(|| Fault::type_error(format!("{what} must be a list, got {}", v.type_name())))
    }

    pub fn map<'a>(v: &'a Value, what: &str) -> Result<&'a BTreeMap<String, Value>, Fault> {
        v.as_map()
            .ok_or_else(|| Fault::type_error(format!("{what} must be a map, got {}", v.type_name())))
    }

    pub fn numbers(v: &Value, what: &str) -> Result<Vec<f64>, Fault> {
        list(v, what)?
            .iter()
            .enumerate()
            .map(|(i, x)| num(x, &format!("{what}[{i}]")))
            .collect()
    }

    pub fn flag(v: &Value, what: &str) -> Result<bool, Fault> {
        match v {
            Value::Bool(b) => Ok(*b),
            Value::Number(x) if *x == 0.0 || *x == 1.0 => Ok(*x == 1.0),
            other => Err(Fault::type_error(format!("{what} must be a boolean or 0/1, got {other}"))),
        }
    }

    pub fn bit(v: &Value, what: &str) -> Result<u8, Fault> {
        flag(v, what).map(u8::from)
    }

    /// Look up `key` in an optional options map.
    pub fn opt<'a>(opts: Option<&'a BTreeMap<String, Value>>, key: &str) -> Option<&'a Value> {
        opts.and_then(|m| m.get(key)).filter(|v| !matches!(v, Value::Null))
    }
}
