use std::collections::BTreeMap;

use hal_virtlab::{Lab, SequenceRequest, SweepRequest};

use super::args::{arity, count, flag, int, list, num};
use super::{add, BuiltinRegistry, CallContext, Group};
use crate::error::Fault;
use crate::value::Value;

pub(super) fn install(r: &mut BuiltinRegistry) {
    add(
        r,
        Group::Lab,
        "vna_sweep",
        "vna_sweep(f_start, f_stop, points[, power, averages, seed])",
        "complex S21 trace as {freq, s21_re, s21_im}",
        vna_sweep,
    );
    add(
        r,
        Group::Lab,
        "qubit_sequence",
        "qubit_sequence(pi_flags, shots[, power, seed])",
        "shots x (len(pi_flags)+1) readout bits",
        qubit_sequence,
    );
}

fn lab<'a>(ctx: &'a CallContext<'_>) -> Result<&'a dyn Lab, Fault> {
    ctx.host
        .lab
        .as_deref()
        .ok_or_else(|| Fault::builtin("no lab is attached to this session"))
}

fn vna_sweep(a: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 3, 6, "vna_sweep(f_start, f_stop, points[, power, averages, seed])")?;
    let averages = match a.get(4) {
        Some(v) => u32::try_from(count(v, "averages")?).map_err(|_| Fault::type_error("averages too large"))?,
        None => 1,
    };
    let req = SweepRequest {
        f_start: num(&a[0], "f_start")?,
        f_stop: num(&a[1], "f_stop")?,
        points: count(&a[2], "points")?,
        power: a.get(3).map(|v| num(v, "power")).transpose()?.unwrap_or(0.0),
        averages,
        seed: a.get(5).map(|v| int(v, "seed")).transpose()?.unwrap_or(0) as u64,
    };
    let resp = lab(ctx)?.sweep(&req).map_err(|e| Fault::builtin(e.to_string()))?;
    let mut out = BTreeMap::new();
    out.insert("freq".to_string(), Value::numbers(resp.freq));
    out.insert("s21_re".to_string(), Value::numbers(resp.s21_re));
    out.insert("s21_im".to_string(), Value::numbers(resp.s21_im));
    Ok(Value::map(out))
}

fn qubit_sequence(a: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 2, 4, "qubit_sequence(pi_flags, shots[, power, seed])")?;
    let pi_flags = list(&a[0], "pi_flags")?
        .iter()
        .enumerate()
        .map(|(i, v)| flag(v, &format!("pi_flags[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let power = match a.get(2) {
        None | Some(Value::Null) => None,
        Some(v) => Some(num(v, "power")?),
    };
    let req = SequenceRequest {
        pi_flags,
        shots: count(&a[1], "shots")?,
        power,
        seed: a.get(3).map(|v| int(v, "seed")).transpose()?.unwrap_or(0) as u64,
    };
    let resp = lab(ctx)?.sequence(&req).map_err(|e| Fault::builtin(e.to_string()))?;
    Ok(Value::list(
        resp.bits
            .into_iter()
            .map(|row| Value::numbers(row.into_iter().map(f64::from)))
            .collect(),
    ))
}
