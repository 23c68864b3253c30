use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use crate::ast::{BinOp, Expr, Program, Stmt, Target, UnOp};
use crate::builtins::{CallContext, Group};
use crate::env::{Environment, Script, SIGNAL_KEY};
use crate::error::{ErrorKind, Fault, RuntimeError};
use crate::value::Value;

/// Largest list or string a script may build.
pub const MAX_ITEMS: usize = 10_000_000;

type Locals = HashMap<String, Value>;

pub(crate) struct Interpreter<'e> {
    env: &'e mut Environment,
    steps: u64,
    started: Instant,
    log: Vec<String>,
    depth: usize,
}

impl<'e> Interpreter<'e> {
    pub fn new(env: &'e mut Environment) -> Self {
        Self {
            env,
            steps: 0,
            started: Instant::now(),
            log: Vec::new(),
            depth: 0,
        }
    }

    pub fn finish(self) -> (u64, Vec<String>) {
        (self.steps, self.log)
    }

    pub fn run_top(&mut self, program: &Program) -> Result<(), RuntimeError> {
        let mut locals = Locals::new();
        self.block(&program.body, &mut locals)
    }

    fn tick(&mut self, line: usize) -> Result<(), RuntimeError> {
        self.steps += 1;
        let budget = self.env.budget;
        if self.steps > budget.max_steps {
            return Err(Fault::new(
                ErrorKind::Budget,
                format!("step budget of {} exhausted", budget.max_steps),
            )
            .at(line));
        }
        if self.steps % 1024 == 0 && self.started.elapsed() > budget.max_wall {
            return Err(Fault::new(
                ErrorKind::Budget,
                format!("wall-clock budget of {} ms exhausted", budget.max_wall.as_millis()),
            )
            .at(line));
        }
        Ok(())
    }

    fn block(&mut self, body: &[Stmt], locals: &mut Locals) -> Result<(), RuntimeError> {
        for stmt in body {
            self.stmt(stmt, locals)?;
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt, locals: &mut Locals) -> Result<(), RuntimeError> {
        let line = stmt.pos().line;
        self.tick(line)?;
        match stmt {
            Stmt::Expr(e, _) => {
                self.expr(e, locals)?;
            }
            Stmt::Assign { target, value, .. } => {
                let v = self.expr(value, locals)?;
                self.assign(target, v, locals, line)?;
            }
            Stmt::If { branches, otherwise, .. } => {
                for (cond, body) in branches {
                    if self.expr(cond, locals)?.truthy() {
                        return self.block(body, locals);
                    }
                }
                if let Some(body) = otherwise {
                    self.block(body, locals)?;
                }
            }
            Stmt::While { cond, body, .. } => {
                while self.expr(cond, locals)?.truthy() {
                    self.block(body, locals)?;
                    self.tick(line)?;
                }
            }
            Stmt::For { var, iter, body, .. } => {
                let items: Vec<Value> = match self.expr(iter, locals)? {
                    Value::List(l) => l.as_ref().clone(),
                    Value::Map(m) => m.keys().map(Value::str).collect(),
                    Value::Str(s) => s.chars().map(|c| Value::str(c.to_string())).collect(),
                    other => {
                        return Err(Fault::type_error(format!("cannot iterate over {}", other.type_name())).at(line))
                    }
                };
                for item in items {
                    locals.insert(var.clone(), item);
                    self.block(body, locals)?;
                    self.tick(line)?;
                }
            }
        }
        Ok(())
    }

    fn assign(&mut self, target: &Target, value: Value, locals: &mut Locals, line: usize) -> Result<(), RuntimeError> {
        match target {
            Target::Var(name) => {
                locals.insert(name.clone(), value);
            }
            Target::Signal => {
                let text = Value::str(value.to_string());
                Arc::make_mut(&mut self.env.state).insert(SIGNAL_KEY.to_string(), text);
            }
            Target::Index { root, path } => {
                let keys = path
                    .iter()
                    .map(|e| self.expr(e, locals))
                    .collect::<Result<Vec<_>, _>>()?;
                if root == "STATE" {
                    if let Some(p) = value.find_non_finite() {
                        return Err(Fault::type_error(format!(
                            "cannot write a non-finite number to STATE (at {}{p})",
                            keys.iter().map(|k| format!("[{}]", k)).collect::<String>()
                        ))
                        .at(line));
                    }
                    let key = match &keys[0] {
                        Value::Str(s) => s.to_string(),
                        other => {
                            return Err(
                                Fault::type_error(format!("STATE keys must be strings, got {}", other.type_name()))
                                    .at(line),
                            )
                        }
                    };
                    let state = Arc::make_mut(&mut self.env.state);
                    let slot = state.entry(key).or_insert(Value::Null);
                    set_path(slot, &keys[1..], value).map_err(|f| f.at(line))?;
                } else {
                    let slot = locals
                        .get_mut(root)
                        .ok_or_else(|| Fault::new(ErrorKind::Name, format!("undefined variable {root:?}")).at(line))?;
                    set_path(slot, &keys, value).map_err(|f| f.at(line))?;
                }
            }
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr, locals: &mut Locals) -> Result<Value, RuntimeError> {
        let line = e.pos().map_or(0, |p| p.line);
        self.tick(line)?;
        Ok(match e {
            Expr::Num(x) => Value::Number(*x),
            Expr::Str(s) => Value::str(s),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Null => Value::Null,
            Expr::Ident(name, _) => match name.as_str() {
                "STATE" => Value::Map(Arc::clone(&self.env.state)),
                "SIGNAL" => self.env.state.get(SIGNAL_KEY).cloned().unwrap_or_default(),
                _ => locals
                    .get(name)
                    .cloned()
                    .ok_or_else(|| Fault::new(ErrorKind::Name, format!("undefined variable {name:?}")).at(line))?,
            },
            Expr::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.expr(item, locals)?);
                }
                Value::list(out)
            }
            Expr::Map(entries) => {
                let mut out = BTreeMap::new();
                for (k, v) in entries {
                    let v = self.expr(v, locals)?;
                    out.insert(k.clone(), v);
                }
                Value::map(out)
            }
            Expr::Index { target, index, .. } => {
                let t = self.expr(target, locals)?;
                let i = self.expr(index, locals)?;
                get_index(&t, &i).map_err(|f| f.at(line))?
            }
            Expr::Call { name, args, .. } => self.call(name, args, locals, line)?,
            Expr::Unary { op, expr, .. } => {
                let v = self.expr(expr, locals)?;
                match op {
                    UnOp::Not => Value::Bool(!v.truthy()),
                    UnOp::Neg => match v {
                        Value::Number(x) => Value::Number(-x),
                        other => {
                            return Err(Fault::type_error(format!("cannot negate {}", other.type_name())).at(line))
                        }
                    },
                }
            }
            Expr::Binary { op, lhs, rhs, .. } => match op {
                BinOp::And => {
                    let l = self.expr(lhs, locals)?.truthy();
                    Value::Bool(l && self.expr(rhs, locals)?.truthy())
                }
                BinOp::Or => {
                    let l = self.expr(lhs, locals)?.truthy();
                    Value::Bool(l || self.expr(rhs, locals)?.truthy())
                }
                _ => {
                    let l = self.expr(lhs, locals)?;
                    let r = self.expr(rhs, locals)?;
                    binary(*op, l, r).map_err(|f| f.at(line))?
                }
            },
        })
    }

    fn call(&mut self, name: &str, args: &[Expr], locals: &mut Locals, line: usize) -> Result<Value, RuntimeError> {
        let group = if name == "invoke" {
            Group::Core
        } else {
            match self.env.builtins.get(name) {
                Some(b) => b.group(),
                None => return Err(Fault::new(ErrorKind::Name, format!("unknown function {name:?}")).at(line)),
            }
        };
        if !self.env.capabilities.contains(&group) {
            return Err(Fault::new(
                ErrorKind::Capability,
                format!("{name} needs the {} capability, which is disabled", group.as_str()),
            )
            .at(line));
        }
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(self.expr(a, locals)?);
        }
        if name == "invoke" {
            return self.invoke(&values, line);
        }
        let builtins = Arc::clone(&self.env.builtins);
        let builtin = builtins.get(name).expect("looked up above");
        let mut ctx = CallContext {
            host: &self.env.host,
            log: &mut self.log,
        };
        let out = builtin.call(&values, &mut ctx).map_err(|f| f.at(line))?;
        if let Some(len) = oversized(&out) {
            return Err(Fault::new(ErrorKind::Budget, format!("{name} returned {len} items")).at(line));
        }
        Ok(out)
    }

    fn invoke(&mut self, args: &[Value], line: usize) -> Result<Value, RuntimeError> {
        let id = match args {
            [Value::Str(id)] => id.to_string(),
            _ => return Err(Fault::type_error("invoke(id) takes one string").at(line)),
        };
        let limit = self.env.budget.max_invoke_depth;
        if self.depth >= limit {
            return Err(Fault::new(ErrorKind::Budget, format!("invoke depth exceeds {limit}")).at(line));
        }
        let script = match self.env.registry.get(&id) {
            Some(s) => s.program.clone(),
            None => {
                let source = self
                    .env
                    .host
                    .resolver
                    .as_ref()
                    .and_then(|r| r.resolve(&id))
                    .ok_or_else(|| Fault::new(ErrorKind::Name, format!("no script registered as {id:?}")).at(line))?;
                Script::parse(source)
                    .map_err(|e| Fault::builtin(format!("script {id:?} does not parse: {e}")).at(line))?
                    .program
            }
        };
        self.depth += 1;
        let mut locals = Locals::new();
        let out = self.block(&script.body, &mut locals);
        self.depth -= 1;
        out.map(|()| Value::Null)
    }
}

fn oversized(v: &Value) -> Option<usize> {
    match v {
        Value::List(l) if l.len() > MAX_ITEMS => Some(l.len()),
        Value::Str(s) if s.len() > MAX_ITEMS => Some(s.len()),
        _ => None,
    }
}

fn index_of(len: usize, i: f64) -> Result<usize, Fault> {
    if i.fract() != 0.0 || !i.is_finite() {
        return Err(Fault::type_error(format!("list index must be an integer, got {i}")));
    }
    let idx = if i < 0.0 { len as f64 + i } else { i };
    if idx < 0.0 || idx >= len as f64 {
        return Err(Fault::type_error(format!("index {i} out of range for length {len}")));
    }
    Ok(idx as usize)
}

fn get_index(target: &Value, index: &Value) -> Result<Value, Fault> {
    match (target, index) {
        (Value::List(l), Value::Number(i)) => Ok(l[index_of(l.len(), *i)?].clone()),
        (Value::Map(m), Value::Str(k)) => Ok(m.get(k.as_ref()).cloned().unwrap_or_default()),
        (Value::Str(s), Value::Number(i)) => {
            let chars: Vec<char> = s.chars().collect();
            Ok(Value::str(chars[index_of(chars.len(), *i)?].to_string()))
        }
        (t, i) => Err(Fault::type_error(format!("cannot index {} with {}", t.type_name(), i.type_name()))),
    }
}

fn set_path(slot: &mut Value, path: &[Value], value: Value) -> Result<(), Fault> {
    let Some((first, rest)) = path.split_first() else {
        *slot = value;
        return Ok(());
    };
    if matches!(slot, Value::Null) && matches!(first, Value::Str(_)) {
        *slot = Value::map(BTreeMap::new());
    }
    match (slot, first) {
        (Value::Map(m), Value::Str(k)) => {
            let entry = Arc::make_mut(m).entry(k.to_string()).or_insert(Value::Null);
            set_path(entry, rest, value)
        }
        (Value::List(l), Value::Number(i)) => {
            let idx = index_of(l.len(), *i)?;
            set_path(&mut Arc::make_mut(l)[idx], rest, value)
        }
        (s, k) => Err(Fault::type_error(format!(
            "cannot assign into {} with a {} index",
            s.type_name(),
            k.type_name()
        ))),
    }
}

fn compare(l: &Value, r: &Value) -> Result<std::cmp::Ordering, Fault> {
    match (l, r) {
        (Value::Number(a), Value::Number(b)) => a
            .partial_cmp(b)
            .ok_or_else(|| Fault::type_error("cannot order NaN")),
        (Value::Str(a), Value::Str(b)) => Ok(a.cmp(b)),
        _ => Err(Fault::type_error(format!(
            "cannot order {} and {}",
            l.type_name(),
            r.type_name()
        ))),
    }
}

fn binary(op: BinOp, l: Value, r: Value) -> Result<Value, Fault> {
    use std::cmp::Ordering::*;
    Ok(match op {
        BinOp::Eq => Value::Bool(l == r),
        BinOp::Ne => Value::Bool(l != r),
        BinOp::Lt => Value::Bool(compare(&l, &r)? == Less),
        BinOp::Le => Value::Bool(compare(&l, &r)? != Greater),
        BinOp::Gt => Value::Bool(compare(&l, &r)? == Greater),
        BinOp::Ge => Value::Bool(compare(&l, &r)? != Less),
        BinOp::Add => match (l, r) {
            (Value::Number(a), Value::Number(b)) => Value::Number(a + b),
            (Value::Str(a), Value::Str(b)) => {
                if a.len() + b.len() > MAX_ITEMS {
                    return Err(Fault::new(ErrorKind::Budget, "string too long"));
                }
                Value::str(format!("{a}{b}"))
            }
            (Value::List(a), Value::List(b)) => {
                if a.len() + b.len() > MAX_ITEMS {
                    return Err(Fault::new(ErrorKind::Budget, "list too long"));
                }
                let mut out = Arc::unwrap_or_clone(a);
                out.extend(b.iter().cloned());
                Value::list(out)
            }
            (a, b) => {
                return Err(Fault::type_error(format!(
                    "cannot add {} and {} (use str() to build text)",
                    a.type_name(),
                    b.type_name()
                )))
            }
        },
        BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => match (l, r) {
            (Value::Number(a), Value::Number(b)) => Value::Number(match op {
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                _ => a - b * (a / b).floor(),
            }),
            (a, b) => {
                return Err(Fault::type_error(format!(
                    "arithmetic needs numbers, got {} and {}",
                    a.type_name(),
                    b.type_name()
                )))
            }
        },
        BinOp::And | BinOp::Or => unreachable!("short-circuit operators are evaluated lazily"),
    })
}
