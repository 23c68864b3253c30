use std::collections::BTreeMap;
use std::sync::Arc;

use hal_core::engine::{CycleRecord, Engine, EngineError, Session};
use hal_runtime::Value;
use hal_virtlab::Storage;
use serde_json::Value as Json;

use crate::bundle::{load_manifest, ScenarioBundle};
use crate::report::{Check, FitRow, LeakageRow, Outcome, PowerOutcome, PowerRow, QndOutcome, ResonatorOutcome, SeriesRows};
use crate::ScenarioError;

/// One runnable experiment: its bundle, how it primes a session and how it
/// reads and judges the results.
pub trait Scenario: Send + Sync {
    fn bundle(&self) -> &ScenarioBundle;

    fn name(&self) -> &str {
        &self.bundle().name
    }

    /// Operator-supplied STATE entries written before the first cycle.
    fn prime(&self, _engine: &Engine, _session: &mut Session) -> Result<(), EngineError> {
        Ok(())
    }

    fn outcome(&self, history: &[CycleRecord], state: &Json, storage: Option<&Storage>) -> Result<Outcome, String>;

    fn checks(&self, outcome: &Outcome) -> Vec<Check>;
}

fn numbers(state: &Json, key: &str) -> Result<Vec<f64>, String> {
    match state.get(key) {
        None | Some(Json::Null) => Ok(Vec::new()),
        Some(Json::Array(items)) => items
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| format!("STATE[{key:?}] holds a non-number")))
            .collect(),
        Some(other) => Err(format!("STATE[{key:?}] is not a list: {other}")),
    }
}

fn number(map: &Json, key: &str) -> Result<f64, String> {
    map.get(key).and_then(Json::as_f64).ok_or_else(|| format!("missing number {key:?}"))
}

fn text<'a>(state: &'a Json, key: &str) -> Result<&'a str, String> {
    state
        .get(key)
        .and_then(Json::as_str)
        .ok_or_else(|| format!("STATE[{key:?}] is not set"))
}

/// `N` from signals of the form "Found N ...".
fn found_count(signal: &str) -> Option<usize> {
    signal.strip_prefix("Found ")?.split_whitespace().next()?.parse().ok()
}

pub struct ResonatorScenario(pub ScenarioBundle);

impl Scenario for ResonatorScenario {
    fn bundle(&self) -> &ScenarioBundle {
        &self.0
    }

    fn outcome(&self, history: &[CycleRecord], state: &Json, _: Option<&Storage>) -> Result<Outcome, String> {
        let found_counts = history
            .iter()
            .filter_map(|r| r.signal_value.as_deref().and_then(found_count))
            .collect();
        let (qi, qc) = (numbers(state, "Qi_list")?, numbers(state, "Qc_list")?);
        let f = if qi.is_empty() { Vec::new() } else { numbers(state, "f_list")? };
        if f.len() != qi.len() || qi.len() != qc.len() {
            return Err(format!(
                "fit lists differ in length: f_list {}, Qi_list {}, Qc_list {}",
                f.len(),
                qi.len(),
                qc.len()
            ));
        }
        let fits = (0..f.len()).map(|i| FitRow { f_r: f[i], q_i: qi[i], q_c: qc[i] }).collect();
        Ok(Outcome::Resonator(ResonatorOutcome { found_counts, fits }))
    }

    fn checks(&self, outcome: &Outcome) -> Vec<Check> {
        let Outcome::Resonator(o) = outcome else {
            return vec![Check::new("outcome", false, "no resonator results")];
        };
        let e = &self.0.expected;
        let mut out = Vec::new();
        if let Some(counts) = &e.counts {
            out.push(Check::new(
                "found_counts",
                &o.found_counts == counts,
                format!("reported {:?}, expected {counts:?}", o.found_counts),
            ));
        }
        if let Some(n) = e.fits {
            out.push(Check::new("fit_count", o.fits.len() == n, format!("{} fits, expected {n}", o.fits.len())));
        }
        let truth = &self.0.lab_config.resonators;
        let mut worst = [0.0f64; 3];
        let mut unmatched = 0;
        let mut used = vec![false; truth.len()];
        for fit in &o.fits {
            let nearest = truth
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1.f_r - fit.f_r).abs().total_cmp(&(b.1.f_r - fit.f_r).abs()));
            match nearest {
                Some((i, t)) if !used[i] => {
                    used[i] = true;
                    worst[0] = worst[0].max(((fit.f_r - t.f_r) / t.f_r).abs());
                    worst[1] = worst[1].max(((fit.q_i - t.q_i) / t.q_i).abs());
                    worst[2] = worst[2].max(((fit.q_c - t.q_c) / t.q_c).abs());
                }
                _ => unmatched += 1,
            }
        }
        if let Some(tol) = e.f_r_rel {
            out.push(Check::new(
                "f_r",
                unmatched == 0 && worst[0] <= tol,
                format!("worst relative error {:.3e} (limit {tol:e}), {unmatched} unmatched", worst[0]),
            ));
        }
        if let Some(tol) = e.q_rel {
            for (name, w) in [("q_i", worst[1]), ("q_c", worst[2])] {
                out.push(Check::new(
                    name,
                    unmatched == 0 && w <= tol,
                    format!("worst relative error {w:.4} (limit {tol})"),
                ));
            }
        }
        out
    }
}

pub struct QndScenario(pub ScenarioBundle);

impl Scenario for QndScenario {
    fn bundle(&self) -> &ScenarioBundle {
        &self.0
    }

    fn outcome(&self, _: &[CycleRecord], state: &Json, storage: Option<&Storage>) -> Result<Outcome, String> {
        let fit = state.get("fit").ok_or("STATE[\"fit\"] is not set")?;
        let fit = LeakageRow {
            a: number(fit, "A")?,
            b: number(fit, "B")?,
            l: number(fit, "L")?,
            sigma_l: number(fit, "sigma_L")?,
            j_min: number(fit, "j_min")?,
            j_max: number(fit, "j_max")?,
            degenerate: fit.get("degenerate").and_then(Json::as_bool).ok_or("missing \"degenerate\"")?,
        };
        let dataset_path = text(state, "data_file")?.to_string();
        let storage = storage.ok_or("no storage to read the correlation series from")?;
        let mut ds = storage.load(&dataset_path).map_err(|e| e.to_string())?;
        let mut column = |k: &str| ds.columns.remove(k).ok_or_else(|| format!("dataset has no {k:?} column"));
        let series = SeriesRows {
            j: column("j")?,
            c_avg: column("c_avg")?,
            n_samples: column("n_samples")?,
        };
        Ok(Outcome::Qnd(QndOutcome { series, fit, dataset_path }))
    }

    fn checks(&self, outcome: &Outcome) -> Vec<Check> {
        let Outcome::Qnd(o) = outcome else {
            return vec![Check::new("outcome", false, "no leakage results")];
        };
        let e = &self.0.expected;
        let truth = self.0.lab_config.qubit.leak_per_readout;
        let (l, s) = (o.fit.l, o.fit.sigma_l);
        let mut out = Vec::new();
        if let Some(k) = e.sigma_factor {
            out.push(Check::new(
                "leakage_recovered",
                (l - truth).abs() <= k * s,
                format!("L = {l:.4} +/- {s:.4}, truth {truth}, limit {k} sigma"),
            ));
        }
        if let Some(max) = e.sigma_l_max {
            out.push(Check::new("sigma_l", s <= max, format!("sigma_L = {s:.4}, limit {max}")));
        }
        if let Some(max) = e.l_max {
            out.push(Check::new("leakage_bound", l < max, format!("L = {l:.5}, limit {max}")));
        }
        out
    }
}

pub struct PowerSweepScenario(pub ScenarioBundle);

impl Scenario for PowerSweepScenario {
    fn bundle(&self) -> &ScenarioBundle {
        &self.0
    }

    fn prime(&self, engine: &Engine, session: &mut Session) -> Result<(), EngineError> {
        let powers = self.0.lab_config.qubit.power_table.iter().map(|e| Value::Number(e.power)).collect();
        engine.patch_state(session, BTreeMap::from([("powers".to_string(), Value::list(powers))]))
    }

    fn outcome(&self, _: &[CycleRecord], state: &Json, storage: Option<&Storage>) -> Result<Outcome, String> {
        let table = state.get("table").ok_or("STATE[\"table\"] is not set")?;
        let col = |k: &str| numbers(table, k);
        let (power, vis, rep, oml, sig) = (
            col("power")?,
            col("visibility")?,
            col("repeatability")?,
            col("one_minus_L")?,
            col("sigma_L")?,
        );
        if [vis.len(), rep.len(), oml.len(), sig.len()].iter().any(|&n| n != power.len()) {
            return Err("table columns differ in length".into());
        }
        let rows = (0..power.len())
            .map(|i| PowerRow {
                power: power[i],
                visibility: vis[i],
                repeatability: rep[i],
                one_minus_l: oml[i],
                sigma_l: sig[i],
            })
            .collect();
        let dataset_path = text(state, "table_file")?.to_string();
        if let Some(storage) = storage {
            let ds = storage.load(&dataset_path).map_err(|e| e.to_string())?;
            for k in ["power", "visibility", "repeatability", "one_minus_L"] {
                if !ds.columns.contains_key(k) {
                    return Err(format!("plot dataset lacks the {k:?} column"));
                }
            }
        }
        Ok(Outcome::PowerSweep(PowerOutcome { table: rows, dataset_path }))
    }

    fn checks(&self, outcome: &Outcome) -> Vec<Check> {
        let Outcome::PowerSweep(o) = outcome else {
            return vec![Check::new("outcome", false, "no power sweep results")];
        };
        let e = &self.0.expected;
        let entries = &self.0.lab_config.qubit.power_table;
        let mut out = vec![Check::new(
            "rows",
            o.table.len() == entries.len(),
            format!("{} rows for {} table entries", o.table.len(), entries.len()),
        )];
        if e.monotone {
            let decreasing = o.table.windows(2).all(|w| w[1].one_minus_l < w[0].one_minus_l);
            let shown: Vec<String> = o.table.iter().map(|r| format!("{:.4}", r.one_minus_l)).collect();
            out.push(Check::new("monotone", decreasing, format!("1-L = [{}]", shown.join(", "))));
        }
        if let Some(k) = e.sigma_factor {
            let misses: Vec<String> = o
                .table
                .iter()
                .zip(entries)
                .filter(|(r, t)| (r.one_minus_l - (1.0 - t.leak)).abs() > k * r.sigma_l)
                .map(|(r, t)| format!("power {}: 1-L {:.4} +/- {:.4} vs {}", r.power, r.one_minus_l, r.sigma_l, 1.0 - t.leak))
                .collect();
            out.push(Check::new(
                "leakage_recovered",
                misses.is_empty() && o.table.len() == entries.len(),
                if misses.is_empty() { format!("all rows within {k} sigma") } else { misses.join("; ") },
            ));
        }
        out
    }
}

type Factory = Box<dyn Fn(ScenarioBundle) -> Arc<dyn Scenario> + Send + Sync>;

/// Scenario kinds and the named scenarios built from them.
#[derive(Default)]
pub struct ScenarioRegistry {
    kinds: BTreeMap<String, Factory>,
    scenarios: BTreeMap<String, Arc<dyn Scenario>>,
}

impl ScenarioRegistry {
    /// The three shipped kinds and every bundle in the fixture manifest.
    pub fn standard() -> Result<Self, ScenarioError> {
        let mut r = Self::default();
        r.register_kind("resonator", |b| Arc::new(ResonatorScenario(b)));
        r.register_kind("qnd", |b| Arc::new(QndScenario(b)));
        r.register_kind("power-sweep", |b| Arc::new(PowerSweepScenario(b)));
        for bundle in load_manifest()? {
            r.add_bundle(bundle)?;
        }
        Ok(r)
    }

    pub fn register_kind(
        &mut self,
        kind: &str,
        factory: impl Fn(ScenarioBundle) -> Arc<dyn Scenario> + Send + Sync + 'static,
    ) {
        self.kinds.insert(kind.to_string(), Box::new(factory));
    }

    pub fn add_bundle(&mut self, bundle: ScenarioBundle) -> Result<(), ScenarioError> {
        let factory = self
            .kinds
            .get(&bundle.kind)
            .ok_or_else(|| ScenarioError::Fixture(format!("scenario {:?} has unknown kind {:?}", bundle.name, bundle.kind)))?;
        let name = bundle.name.clone();
        if self.scenarios.insert(name.clone(), factory(bundle)).is_some() {
            return Err(ScenarioError::Fixture(format!("scenario {name:?} is defined twice")));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Scenario>, ScenarioError> {
        self.scenarios
            .get(name)
            .cloned()
            .ok_or_else(|| ScenarioError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.scenarios.keys().map(String::as_str)
    }

    pub fn all(&self) -> impl Iterator<Item = &Arc<dyn Scenario>> {
        self.scenarios.values()
    }
}
