use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::args::{arity, count, int, map, num, numbers};
use super::{add, BuiltinRegistry, CallContext, Group};
use crate::error::{ErrorKind, Fault};
use crate::interp::MAX_ITEMS;
use crate::value::Value;

pub(super) fn install(r: &mut BuiltinRegistry) {
    let g = Group::Core;
    add(r, g, "len", "len(x)", "length of a list, map or string", len);
    add(r, g, "range", "range(stop) | range(start, stop[, step])", "list of integers", range);
    add(r, g, "abs", "abs(x)", "absolute value", |a, _| unary(a, "abs(x)", f64::abs));
    add(r, g, "sqrt", "sqrt(x)", "square root of a non-negative number", sqrt);
    add(r, g, "log10", "log10(x)", "base-10 logarithm of a positive number", log10);
    add(r, g, "round", "round(x[, digits])", "round half away from zero", round);
    add(r, g, "str", "str(x)", "text rendering of any value", |a, _| {
        arity(a, 1, 1, "str(x)")?;
        Ok(Value::str(a[0].to_string()))
    });
    add(r, g, "min", "min(list) | min(a, b, ...)", "smallest number", |a, _| extreme(a, "min", f64::min));
    add(r, g, "max", "max(list) | max(a, b, ...)", "largest number", |a, _| extreme(a, "max", f64::max));
    add(r, g, "sum", "sum(list)", "sum of numbers", |a, _| {
        arity(a, 1, 1, "sum(list)")?;
        Ok(Value::Number(numbers(&a[0], "sum argument")?.iter().sum()))
    });
    add(r, g, "keys", "keys(map)", "sorted list of map keys", |a, _| {
        arity(a, 1, 1, "keys(map)")?;
        Ok(Value::list(map(&a[0], "keys argument")?.keys().map(Value::str).collect()))
    });
    add(r, g, "print", "print(x, ...)", "append a line to the execution log", print);
    add(
        r,
        g,
        "random_flags",
        "random_flags(n, seed)",
        "n seeded fair coin flips as booleans",
        random_flags,
    );
}

fn len(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 1, 1, "len(x)")?;
    let n = match &a[0] {
        Value::List(l) => l.len(),
        Value::Map(m) => m.len(),
        Value::Str(s) => s.chars().count(),
        other => return Err(Fault::type_error(format!("len of {}", other.type_name()))),
    };
    Ok(Value::Number(n as f64))
}

fn range(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 1, 3, "range(stop) | range(start, stop[, step])")?;
    let (start, stop, step) = match a.len() {
        1 => (0, int(&a[0], "stop")?, 1),
        2 => (int(&a[0], "start")?, int(&a[1], "stop")?, 1),
        _ => (int(&a[0], "start")?, int(&a[1], "stop")?, int(&a[2], "step")?),
    };
    if step == 0 {
        return Err(Fault::type_error("range step must not be zero"));
    }
    let n = if step > 0 {
        ((stop - start).max(0) as u64).div_ceil(step as u64)
    } else {
        ((start - stop).max(0) as u64).div_ceil(step.unsigned_abs())
    };
    if n > MAX_ITEMS as u64 {
        return Err(Fault::new(ErrorKind::Budget, format!("range of {n} items is too large")));
    }
    Ok(Value::numbers((0..n as i64).map(|i| (start + i * step) as f64)))
}

fn unary(a: &[Value], sig: &str, f: fn(f64) -> f64) -> Result<Value, Fault> {
    arity(a, 1, 1, sig)?;
    Ok(Value::Number(f(num(&a[0], "argument")?)))
}

fn sqrt(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 1, 1, "sqrt(x)")?;
    let x = num(&a[0], "argument")?;
    if x < 0.0 {
        return Err(Fault::builtin(format!("sqrt of negative number {x}")));
    }
    Ok(Value::Number(x.sqrt()))
}

fn log10(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 1, 1, "log10(x)")?;
    let x = num(&a[0], "argument")?;
    if x <= 0.0 {
        return Err(Fault::builtin(format!("log10 of non-positive number {x}")));
    }
    Ok(Value::Number(x.log10()))
}

fn round(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 1, 2, "round(x[, digits])")?;
    let x = num(&a[0], "argument")?;
    let digits = match a.get(1) {
        Some(d) => int(d, "digits")?.clamp(-300, 300) as i32,
        None => 0,
    };
    let scale = 10f64.powi(digits);
    Ok(Value::Number((x * scale).round() / scale))
}

fn extreme(a: &[Value], name: &str, pick: fn(f64, f64) -> f64) -> Result<Value, Fault> {
    let xs = match a {
        [] => return Err(Fault::type_error(format!("{name} needs arguments"))),
        [Value::List(_)] => numbers(&a[0], &format!("{name} argument"))?,
        _ => a
            .iter()
            .map(|v| num(v, &format!("{name} argument")))
            .collect::<Result<_, _>>()?,
    };
    xs.into_iter()
        .reduce(pick)
        .map(Value::Number)
        .ok_or_else(|| Fault::builtin(format!("{name} of an empty list")))
}

fn print(a: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, Fault> {
    let line = a.iter().map(Value::to_string).collect::<Vec<_>>().join(" ");
    ctx.log.push(line);
    Ok(Value::Null)
}

fn random_flags(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 2, 2, "random_flags(n, seed)")?;
    let n = count(&a[0], "n")?;
    if n > MAX_ITEMS {
        return Err(Fault::new(ErrorKind::Budget, format!("{n} flags is too many")));
    }
    let seed = int(&a[1], "seed")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    Ok(Value::list((0..n).map(|_| Value::Bool(rng.random_bool(0.5))).collect()))
}
