use std::collections::BTreeMap;

use hal_analysis::{
    correlation_series, find_resonances, fit_leakage, fit_resonator, readout_metrics, CorrelationSeries,
    PeakOptions,
};

use super::args::{arity, bit, count, flag, list, map, num, numbers, opt};
use super::{add, BuiltinRegistry, CallContext, Group};
use crate::error::Fault;
use crate::value::Value;

pub(super) fn install(r: &mut BuiltinRegistry) {
    let g = Group::Analysis;
    add(
        r,
        g,
        "find_resonances",
        "find_resonances(freq, s21_re, s21_im[, opts]) | find_resonances(freq, mag[, opts])",
        "ascending list of notch frequencies; opts: prominence_db, min_separation_pts, baseline_window_pts",
        find,
    );
    add(
        r,
        g,
        "fit_resonator",
        "fit_resonator(freq, s21_re, s21_im)",
        "notch-model fit: {f_r, Q_i, Q_c, phi, a, alpha, residual_rms, sigma}",
        fit_res,
    );
    add(
        r,
        g,
        "correlation_series",
        "correlation_series(flag_sets, bit_sets)",
        "mean pulse/alternation agreement per cycle: {j, c_avg, n_samples}",
        correlation,
    );
    add(
        r,
        g,
        "fit_leakage",
        "fit_leakage(series)",
        "exponential-decay fit of a correlation series: {A, B, L, sigma_L, j_min, j_max, degenerate}",
        leakage,
    );
    add(
        r,
        g,
        "readout_metrics",
        "readout_metrics(prep0_bits, prep1_bits, pairs)",
        "{visibility, repeatability}",
        metrics,
    );
}

fn fault(e: hal_analysis::FitError) -> Fault {
    Fault::builtin(e.to_string())
}

fn record(entries: impl IntoIterator<Item = (&'static str, Value)>) -> Value {
    Value::map(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn find(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 2, 4, "find_resonances(freq, s21_re, s21_im[, opts])")?;
    let freq = numbers(&a[0], "freq")?;
    let (mag, opts) = match a.get(2) {
        Some(Value::List(_)) => {
            let re = numbers(&a[1], "s21_re")?;
            let im = numbers(&a[2], "s21_im")?;
            if re.len() != im.len() {
                return Err(Fault::type_error("s21_re and s21_im differ in length"));
            }
            let mag = re.iter().zip(&im).map(|(r, i)| r.hypot(*i)).collect::<Vec<_>>();
            (mag, a.get(3))
        }
        other => {
            if a.len() > 3 {
                return Err(Fault::type_error("find_resonances(freq, mag[, opts]) takes at most 3 arguments"));
            }
            (numbers(&a[1], "mag")?, other)
        }
    };
    let opts = opts.map(|v| map(v, "opts")).transpose()?;
    let mut po = PeakOptions::default();
    if let Some(v) = opt(opts, "prominence_db") {
        po.prominence_db = num(v, "prominence_db")?;
    }
    if let Some(v) = opt(opts, "min_separation_pts") {
        po.min_separation_pts = count(v, "min_separation_pts")?;
    }
    if let Some(v) = opt(opts, "baseline_window_pts") {
        po.baseline_window_pts = count(v, "baseline_window_pts")?;
    }
    let found = find_resonances(&freq, &mag, &po).map_err(fault)?;
    Ok(Value::numbers(found))
}

fn fit_res(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 3, 3, "fit_resonator(freq, s21_re, s21_im)")?;
    let fit = fit_resonator(
        &numbers(&a[0], "freq")?,
        &numbers(&a[1], "s21_re")?,
        &numbers(&a[2], "s21_im")?,
        None,
    )
    .map_err(fault)?;
    let sigma = fit
        .sigma
        .iter()
        .map(|(k, v)| (k.clone(), Value::Number(*v)))
        .collect::<BTreeMap<_, _>>();
    Ok(record([
        ("f_r", Value::Number(fit.f_r)),
        ("Q_i", Value::Number(fit.q_i)),
        ("Q_c", Value::Number(fit.q_c)),
        ("phi", Value::Number(fit.phi)),
        ("a", Value::Number(fit.a)),
        ("alpha", Value::Number(fit.alpha)),
        ("residual_rms", Value::Number(fit.residual_rms)),
        ("sigma", Value::map(sigma)),
    ]))
}

fn correlation(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 2, 2, "correlation_series(flag_sets, bit_sets)")?;
    let flags = list(&a[0], "flag_sets")?
        .iter()
        .enumerate()
        .map(|(r, set)| {
            list(set, "flag set")?
                .iter()
                .enumerate()
                .map(|(j, v)| flag(v, &format!("flag_sets[{r}][{j}]")))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let bits = list(&a[1], "bit_sets")?
        .iter()
        .map(|set| {
            list(set, "bit set")?
                .iter()
                .map(|row| {
                    list(row, "bit row")?
                        .iter()
                        .map(|v| bit(v, "bit"))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let s = correlation_series(&flags, &bits).map_err(fault)?;
    let n = s.len();
    let mut out = BTreeMap::new();
    out.insert("j".to_string(), Value::numbers(s.j.iter().map(|&j| j as f64)));
    out.insert("c_avg".to_string(), Value::numbers(s.c_avg));
    out.insert("n_samples".to_string(), Value::numbers(s.n_samples.iter().map(|&n| n as f64)));
    for (k, column) in s.cov.chunks(n.max(1)).enumerate() {
        out.insert(format!("cov_{}", k + 1), Value::numbers(column.iter().copied()));
    }
    Ok(Value::map(out))
}

fn leakage(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 1, 1, "fit_leakage(series)")?;
    let m = map(&a[0], "series")?;
    let field = |k: &str| m.get(k).ok_or_else(|| Fault::type_error(format!("series has no {k:?} entry")));
    let j = numbers(field("j")?, "j")?
        .into_iter()
        .map(|x| count(&Value::Number(x), "j"))
        .collect::<Result<Vec<_>, _>>()?;
    let c_avg = numbers(field("c_avg")?, "c_avg")?;
    let n_samples = match m.get("n_samples") {
        Some(v) => numbers(v, "n_samples")?
            .into_iter()
            .map(|x| count(&Value::Number(x), "n_samples"))
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![0; c_avg.len()],
    };
    let mut cov = Vec::new();
    for k in 1..=c_avg.len() {
        match m.get(&format!("cov_{k}")) {
            Some(v) => cov.extend(numbers(v, "cov")?),
            None => {
                cov.clear();
                break;
            }
        }
    }
    let fit = fit_leakage(&CorrelationSeries { j, c_avg, n_samples, cov }).map_err(fault)?;
    Ok(record([
        ("A", Value::Number(fit.a)),
        ("B", Value::Number(fit.b)),
        ("L", Value::Number(fit.l)),
        ("sigma_L", Value::Number(fit.sigma_l)),
        ("j_min", Value::Number(fit.j_range.0 as f64)),
        ("j_max", Value::Number(fit.j_range.1 as f64)),
        ("degenerate", Value::Bool(fit.degenerate)),
    ]))
}

fn metrics(a: &[Value], _: &mut CallContext<'_>) -> Result<Value, Fault> {
    arity(a, 3, 3, "readout_metrics(prep0_bits, prep1_bits, pairs)")?;
    let bits = |v: &Value, what: &str| -> Result<Vec<u8>, Fault> {
        list(v, what)?.iter().map(|b| bit(b, what)).collect()
    };
    let p0 = bits(&a[0], "prep0_bits")?;
    let p1 = bits(&a[1], "prep1_bits")?;
    let pairs = list(&a[2], "pairs")?
        .iter()
        .map(|p| match list(p, "pair")? {
            [x, y] => Ok((bit(x, "pair bit")?, bit(y, "pair bit")?)),
            _ => Err(Fault::type_error("each pair must have two bits")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let m = readout_metrics(&p0, &p1, &pairs).map_err(fault)?;
    Ok(record([
        ("visibility", Value::Number(m.visibility)),
        ("repeatability", Value::Number(m.repeatability)),
    ]))
}
