use std::collections::BTreeMap;

use hal_virtlab::{Dataset, Scalar, Storage};

use super::args::{arity, map, numbers, text};
use super::{add, BuiltinRegistry, CallContext, Group};
use crate::error::Fault;
use crate::value::Value;

pub(super) fn install(r: &mut BuiltinRegistry) {
    add(
        r,
        Group::Storage,
        "save_dataset",
        "save_dataset(label, columns[, meta])",
        "store equal-length number columns; returns the dataset path relative to the store",
        save_dataset,
    );
    add(
        r,
        Group::Storage,
        "load_dataset",
        "load_dataset(path)",
        "read a stored dataset as {meta, columns}",
        load_dataset,
    );
}

fn storage<'a>(ctx: &'a CallContext<'_>) -> Result<&'a Storage, Fault> {
    ctx.host
        .storage
        .as_ref()
        .ok_or_else(|| Fault::builtin("no storage is attached to this session"))
}

fn save_dataset(a: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 2, 3, "save_dataset(label, columns[, meta])")?;
    let label = text(&a[0], "label")?;
    let mut ds = Dataset::new();
    for (name, col) in map(&a[1], "columns")? {
        ds.columns.insert(name.clone(), numbers(col, &format!("column {name}"))?);
    }
    if let Some(meta) = a.get(2) {
        for (k, v) in map(meta, "meta")? {
            let scalar = match v {
                Value::Null => continue,
                Value::Bool(b) => Scalar::Bool(*b),
                Value::Number(x) => Scalar::Number(*x),
                Value::Str(s) => Scalar::Text(s.to_string()),
                other => {
                    return Err(Fault::type_error(format!(
                        "meta.{k} must be a scalar, got {}",
                        other.type_name()
                    )))
                }
            };
            ds.meta.insert(k.clone(), scalar);
        }
    }
    let store = storage(ctx)?;
    let path = store
        .save(&ctx.host.session, label, &ds)
        .map_err(|e| Fault::builtin(e.to_string()))?;
    let relative = path.strip_prefix(store.root()).unwrap_or(&path);
    Ok(Value::str(relative.to_string_lossy()))
}

fn load_dataset(a: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 1, 1, "load_dataset(path)")?;
    let path = text(&a[0], "path")?;
    let ds = storage(ctx)?.load(path).map_err(|e| Fault::builtin(e.to_string()))?;
    let meta = ds
        .meta
        .into_iter()
        .map(|(k, v)| {
            let v = match v {
                Scalar::Bool(b) => Value::Bool(b),
                Scalar::Number(x) => Value::Number(x),
                Scalar::Text(s) => Value::str(s),
            };
            (k, v)
        })
        .collect();
    let columns = ds
        .columns
        .into_iter()
        .map(|(k, v)| (k, Value::numbers(v)))
        .collect();
    let mut out = BTreeMap::new();
    out.insert("meta".to_string(), Value::map(meta));
    out.insert("columns".to_string(), Value::map(columns));
    Ok(Value::map(out))
}
