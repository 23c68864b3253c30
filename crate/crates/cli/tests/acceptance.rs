//! The release gate. Each test prints one PASS/FAIL line and fails on FAIL.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use hal_analysis::{
    correlation_series, fit_leakage, fit_resonator, forward_jacobian, leakage_model, CorrelationSeries, ResonatorParams,
};
use hal_core::engine::Mode;
use hal_core::kb::DocKind;
use hal_gateway::{Gateway, GatewayClient, GatewayConfig};
use hal_runtime::{parse, Budget, Environment, ErrorKind, Group, Host, Script, Value};
use hal_scenarios::rag::RagCase;
use hal_scenarios::{run, scenario_engine, ApproveAll, Report, RunOptions, ScenarioRegistry};
use hal_virtlab::{Lab, LabConfig, LocalLab, ResonatorSpec, Storage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u8, name: &str, passed: bool, detail: &str) {
    let line = format!("{} [{n}] {name}: {detail}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "{line}");
}

struct Timed {
    report: Report,
    elapsed: Duration,
}

fn run_seed(name: &str, seed: u64) -> Timed {
    let registry = ScenarioRegistry::standard().unwrap();
    let scenario = registry.get(name).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { seed, mode: Mode::Auto, data_dir: dir.path().to_path_buf() };
    let started = Instant::now();
    let report = run(scenario.as_ref(), &opts, &mut ApproveAll).unwrap().report;
    Timed { report, elapsed: started.elapsed() }
}

fn sweep(name: &str, seeds: u64, accept: impl Fn(&Report) -> bool) -> (usize, Duration, Vec<u64>) {
    let mut passed = 0;
    let mut slowest = Duration::ZERO;
    let mut misses = Vec::new();
    for seed in 0..seeds {
        let t = run_seed(name, seed);
        slowest = slowest.max(t.elapsed);
        if accept(&t.report) {
            passed += 1;
        } else {
            misses.push(seed);
        }
    }
    (passed, slowest, misses)
}

#[test]
fn resonator_end_to_end() {
    let (passed, slowest, misses) = sweep("resonator", 100, |r| r.passed);
    let ok = passed >= 95 && slowest < Duration::from_secs(30);
    verdict(
        1,
        "resonator characterization",
        ok,
        &format!("{passed}/100 seeds report 4 then 8 and fit all 8 in tolerance; slowest run {slowest:.2?}; misses {misses:?}"),
    );
}

fn qnd_ok(r: &Report) -> bool {
    ["completed", "cycles_executed", "leakage_recovered", "sigma_l"]
        .iter()
        .all(|c| r.check(c).is_some_and(|c| c.passed))
}

#[test]
fn qnd_benchmark() {
    let (passed, slowest, misses) = sweep("qnd", 50, qnd_ok);
    let control: Vec<f64> = (0..10).map(|s| run_seed("qnd-control", s).report.qnd().unwrap().fit.l).collect();
    let worst = control.iter().copied().fold(0.0, f64::max);
    let ok = passed >= 48 && slowest < Duration::from_secs(60) && worst < 0.005;
    verdict(
        2,
        "leakage benchmark",
        ok,
        &format!(
            "{passed}/50 seeds within 2 sigma of 0.124 with sigma_L <= 0.02; slowest {slowest:.2?}; misses {misses:?}; control max L {worst:.2e}"
        ),
    );
}

#[test]
fn knowledge_preparation() {
    let registry = ScenarioRegistry::standard().unwrap();
    let scenario = registry.get("qnd-prepared").unwrap();
    let shipped_plans = scenario.bundle().kb_docs.iter().filter(|d| d.kind == DocKind::Plan).count();
    let engine = scenario_engine(scenario.as_ref()).unwrap();
    let prepared = engine.kb().get("qnd-experiment-plan");
    let is_plan = prepared.as_ref().is_some_and(|d| d.kind == DocKind::Plan);
    let (passed, _, misses) = sweep("qnd-prepared", 50, qnd_ok);
    let ok = shipped_plans == 0 && is_plan && passed >= 48;
    verdict(
        3,
        "knowledge preparation",
        ok,
        &format!("prepared plan present: {is_plan}; other plans: {shipped_plans}; {passed}/50 seeds within tolerance; misses {misses:?}"),
    );
}

#[test]
fn iterative_retrieval() {
    let mut worst_first = 0;
    let mut worst_iter = 0;
    let mut failures = Vec::new();
    for seed in 0..50 {
        let case = RagCase::generate(seed);
        let plain = case.kb.search_text(&case.task, 4).unwrap();
        let hidden = plain.iter().all(|(id, s)| *id != case.target_id || *s <= 0.0);
        match case.evaluate() {
            Ok(r) if hidden && r.first_gathered.is_some_and(|f| f <= 2) && r.iterations <= 5 => {
                worst_first = worst_first.max(r.first_gathered.unwrap());
                worst_iter = worst_iter.max(r.iterations);
            }
            _ => failures.push(seed),
        }
    }
    verdict(
        4,
        "iterative retrieval",
        failures.is_empty(),
        &format!("50 corpora; target gathered by iteration {worst_first} at worst; at most {worst_iter} iterations; failures {failures:?}"),
    );
}

fn script(src: &str) -> Script {
    Script::parse(src).unwrap_or_else(|e| panic!("{e}: {src}"))
}

fn lab_env() -> (Environment, Arc<LocalLab>) {
    let config = LabConfig {
        resonators: vec![ResonatorSpec { f_r: 5.0e9, q_i: 2e4, q_c: 1e4, phi: 0.0 }],
        ..LabConfig::default()
    };
    let lab = Arc::new(LocalLab::new(config).unwrap());
    let host = Host { lab: Some(lab.clone() as Arc<dyn Lab>), ..Host::default() };
    (Environment::with_host(host), lab)
}

fn persistence(rng: &mut ChaCha8Rng) -> bool {
    (0..200).all(|_| {
        let n = rng.random_range(1..6);
        let values: Vec<i64> = (0..n).map(|_| rng.random_range(-1000..1000)).collect();
        let mut split = Environment::new();
        let mut whole = Environment::new();
        let stmts: Vec<String> = values.iter().enumerate().map(|(i, v)| format!("STATE[\"k{}\"] = {v}", i % 3)).collect();
        for s in &stmts {
            split.execute(&script(s));
        }
        whole.execute(&script(&stmts.join("\n")));
        split.state_json() == whole.state_json()
    })
}

fn invoke_by_id() -> bool {
    let (mut env, lab) = lab_env();
    let step1 = "d = vna_sweep(STATE[\"f_start\"], STATE[\"f_stop\"], 51)\nSTATE[\"first\"] = d[\"freq\"][0]\nSIGNAL = \"ok\"";
    env.patch_state(BTreeMap::from([
        ("f_start".to_string(), Value::Number(4e9)),
        ("f_stop".to_string(), Value::Number(6e9)),
    ]))
    .unwrap();
    let first = env.execute(&script(step1));
    env.register("step-1", script(step1)).unwrap();
    let again = env.execute(&script("STATE[\"f_start\"] = 3e9\nSTATE[\"f_stop\"] = 8e9\ninvoke(\"step-1\")"));
    first.is_ok() && again.is_ok() && env.state()["first"].as_f64() == Some(3e9) && lab.requests() == 2
}

fn signal_extraction(rng: &mut ChaCha8Rng) -> bool {
    (0..200).all(|_| {
        let n = rng.random_range(1..6);
        let values: Vec<i64> = (0..n).map(|_| rng.random_range(0..100)).collect();
        let src = values.iter().map(|v| format!("SIGNAL = \"v{v}\"")).collect::<Vec<_>>().join("\n");
        let mut env = Environment::new();
        let r = env.execute(&script(&src));
        r.signal.as_deref() == Some(format!("v{}", values[n - 1]).as_str())
            && !env.state().contains_key(hal_runtime::SIGNAL_KEY)
    })
}

fn capability_gating(rng: &mut ChaCha8Rng) -> bool {
    let calls = [
        ("len([1])", Group::Core),
        ("vna_sweep(4e9, 5e9, 11)", Group::Lab),
        ("load_dataset(\"nowhere\")", Group::Storage),
        ("readout_metrics([0], [1], [[0, 0]])", Group::Analysis),
    ];
    (0..200).all(|_| {
        let mask: u8 = rng.random_range(0..16);
        let (src, group) = calls[rng.random_range(0..calls.len())];
        let (mut env, lab) = lab_env();
        let enabled: Vec<Group> = Group::ALL.into_iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, g)| g).collect();
        env.set_capabilities(enabled.iter().copied());
        let r = env.execute(&script(src));
        let gated = r.error.as_ref().is_some_and(|e| e.kind == ErrorKind::Capability);
        gated == !enabled.contains(&group) && (enabled.contains(&Group::Lab) || lab.requests() == 0)
    })
}

fn budget_enforcement(rng: &mut ChaCha8Rng) -> bool {
    let steps = (0..100).all(|_| {
        let limit = rng.random_range(1..500u64);
        let mut env = Environment::new();
        env.set_budget(Budget { max_steps: limit, ..Budget::default() });
        let r = env.execute(&script("while true { STATE[\"n\"] = 1 }"));
        r.error.is_some_and(|e| e.kind == ErrorKind::Budget) && r.steps_used == limit + 1
    });
    let depth = (1..12).all(|limit| {
        let mut env = Environment::new();
        env.set_budget(Budget { max_invoke_depth: limit, ..Budget::default() });
        env.register("a", script("STATE[\"d\"] = STATE[\"d\"] + 1\ninvoke(\"a\")")).unwrap();
        env.patch_state(BTreeMap::from([("d".to_string(), Value::Number(0.0))])).unwrap();
        let r = env.execute(&script("invoke(\"a\")"));
        r.error.is_some_and(|e| e.kind == ErrorKind::Budget) && env.state()["d"].as_f64() == Some(limit as f64)
    });
    let mut env = Environment::new();
    env.set_budget(Budget { max_steps: u64::MAX, max_wall: Duration::from_millis(50), max_invoke_depth: 8 });
    let started = Instant::now();
    let wall = env.execute(&script("while true { x = 1 }")).error.is_some_and(|e| e.kind == ErrorKind::Budget)
        && started.elapsed() < Duration::from_secs(5);
    steps && depth && wall
}

const VOCAB: &[&str] = &[
    "x", "STATE", "SIGNAL", "len", "range", "invoke", "if", "else", "while", "for", "in", "and", "not", "true",
    "null", "=", "==", "<", "+", "-", "*", "/", "%", "(", ")", "[", "]", "{", "}", ",", ":", "\n", " ", "#c\n",
    "\"s\"", "0", "2.5", "1e999", "!", "@", "\"open", "\t",
];

fn parser_fuzz(rng: &mut ChaCha8Rng) -> (bool, usize) {
    let mut parsed = 0;
    for i in 0..100_000 {
        let src: String = if i % 2 == 0 {
            (0..rng.random_range(0..40)).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
        } else {
            let raw: Vec<u8> = (0..rng.random_range(0..64)).map(|_| rng.random()).collect();
            String::from_utf8_lossy(&raw).into_owned()
        };
        let outcome = std::panic::catch_unwind(|| {
            if let Ok(program) = parse(&src) {
                let mut env = Environment::new();
                env.set_budget(Budget { max_steps: 2_000, ..Budget::default() });
                env.execute(&Script { source: src.clone(), program });
                true
            } else {
                false
            }
        });
        match outcome {
            Ok(true) => parsed += 1,
            Ok(false) => {}
            Err(_) => return (false, parsed),
        }
    }
    (true, parsed)
}

#[test]
fn runtime_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let results = [
        ("persistence", persistence(&mut rng)),
        ("invoke-by-id", invoke_by_id()),
        ("signal", signal_extraction(&mut rng)),
        ("gating", capability_gating(&mut rng)),
        ("budget", budget_enforcement(&mut rng)),
    ];
    let (fuzz_ok, parsed) = parser_fuzz(&mut rng);
    let failed: Vec<&str> = results.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    verdict(
        5,
        "script runtime",
        failed.is_empty() && fuzz_ok,
        &format!("property suites failed: {failed:?}; 100000 fuzzed inputs without a crash: {fuzz_ok} ({parsed} parsed)"),
    );
}

fn central(f: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64], k: usize) -> Vec<f64> {
    let h = 1e-7 * p[k].abs().max(1.0);
    let (mut hi, mut lo) = (p.to_vec(), p.to_vec());
    hi[k] += h;
    lo[k] -= h;
    f(&hi).iter().zip(f(&lo)).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

fn gradient_error(f: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64]) -> f64 {
    let fwd = forward_jacobian(&f, p, &f(p)).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..p.len() {
        let cen = central(f, p, k);
        let scale = cen.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (i, c) in cen.iter().enumerate() {
            worst = worst.max((fwd[(i, k)] - c).abs() / scale);
        }
    }
    worst
}

#[test]
fn numerical_core() {
    let leak = |p: &[f64]| (1..=40).map(|j| leakage_model(p, j as f64)).collect::<Vec<_>>();
    let freq: Vec<f64> = (0..201).map(|i| 5e9 + (i as f64 - 100.0) * 1e6).collect();
    let res = |p: &[f64]| {
        let m = ResonatorParams { f_r: p[0], q_i: p[1], q_c: p[2], phi: p[3], a: p[4], alpha: p[5] };
        freq.iter().flat_map(|&f| {
            let z = m.s21(f);
            [z.re, z.im]
        })
        .collect::<Vec<_>>()
    };
    let grad = gradient_error(&leak, &[0.98, 0.85, 0.124]).max(gradient_error(&res, &[5e9, 1e4, 150.0, 0.1, 0.9, 0.3]));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut res_err: f64 = 0.0;
    for _ in 0..20 {
        let t = ResonatorParams {
            f_r: rng.random_range(3e9..8e9),
            q_i: rng.random_range(5e4..5e5),
            q_c: rng.random_range(5e3..5e4),
            phi: rng.random_range(-0.4..0.4),
            a: rng.random_range(0.3..1.5),
            alpha: rng.random_range(-3.0..3.0),
        };
        let width = t.f_r * (1.0 / t.q_i + 1.0 / t.q_c);
        let f: Vec<f64> = (0..401).map(|i| t.f_r + 10.0 * width * (i as f64 / 200.0 - 1.0)).collect();
        let z: Vec<_> = f.iter().map(|&x| t.s21(x)).collect();
        let re: Vec<f64> = z.iter().map(|c| c.re).collect();
        let im: Vec<f64> = z.iter().map(|c| c.im).collect();
        let fit = fit_resonator(&f, &re, &im, None).unwrap();
        for (a, b) in [(fit.f_r, t.f_r), (fit.q_i, t.q_i), (fit.q_c, t.q_c)] {
            res_err = res_err.max((a - b).abs() / b);
        }
    }
    let mut leak_err: f64 = 0.0;
    for _ in 0..20 {
        let (a, b, l) = (rng.random_range(0.8..1.05), rng.random_range(0.3..1.0), rng.random_range(0.02..0.4));
        let j: Vec<usize> = (1..=40).collect();
        let c_avg = j.iter().map(|&j| leakage_model(&[a, b, l], j as f64)).collect();
        let fit = fit_leakage(&CorrelationSeries { j, c_avg, n_samples: vec![1000; 40], cov: vec![] }).unwrap();
        leak_err = leak_err.max((fit.l - l).abs()).max((fit.a - a).abs()).max((fit.b - b).abs());
    }

    let mut oracle_ok = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..7);
        let reps = rng.random_range(1..4);
        let shots = rng.random_range(1..6);
        let flags: Vec<Vec<bool>> = (0..reps).map(|_| (0..n).map(|_| rng.random_bool(0.5)).collect()).collect();
        let bits: Vec<Vec<Vec<u8>>> = (0..reps)
            .map(|_| (0..shots).map(|_| (0..=n).map(|_| u8::from(rng.random_bool(0.5))).collect()).collect())
            .collect();
        let series = correlation_series(&flags, &bits).unwrap();
        let mut expected = vec![0.0; n];
        for (f, m) in flags.iter().zip(&bits) {
            for shot in m {
                for j in 1..=n {
                    expected[j - 1] += f64::from(u8::from((shot[j] != shot[j - 1]) == f[j - 1]));
                }
            }
        }
        let total = (reps * shots) as f64;
        oracle_ok &= series.c_avg == expected.iter().map(|s| s / total).collect::<Vec<_>>();
    }

    let ok = grad < 1e-5 && res_err < 1e-6 && leak_err < 1e-8 && oracle_ok;
    verdict(
        6,
        "numerical core",
        ok,
        &format!(
            "jacobian rel err {grad:.1e}; resonator round trip {res_err:.1e}; leakage round trip {leak_err:.1e}; correlation oracle on 1000 instances: {oracle_ok}"
        ),
    );
}

#[test]
fn power_sweep() {
    let registry = ScenarioRegistry::standard().unwrap();
    let scenario = registry.get("power-sweep").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { seed: 0, mode: Mode::Auto, data_dir: dir.path().to_path_buf() };
    let report = run(scenario.as_ref(), &opts, &mut ApproveAll).unwrap().report;
    let outcome = report.power_sweep();
    let plot_ready = outcome.is_some_and(|o| {
        Storage::new(dir.path()).load(&o.dataset_path).is_ok_and(|ds| {
            ["power", "visibility", "repeatability", "one_minus_L", "sigma_L"]
                .iter()
                .all(|c| ds.columns.get(*c).is_some_and(|v| v.len() == o.table.len()))
        })
    });
    let rows: Vec<String> = outcome
        .map(|o| o.table.iter().map(|r| format!("{}:{:.4}+/-{:.4}", r.power, r.one_minus_l, r.sigma_l)).collect())
        .unwrap_or_default();
    let detail = report.checks.iter().filter(|c| !c.passed).map(|c| c.detail.clone()).collect::<Vec<_>>();
    verdict(
        7,
        "readout power sweep",
        report.passed && plot_ready,
        &format!("1-L by power {rows:?}; plot-ready dataset: {plot_ready}; failed checks {detail:?}"),
    );
}

#[test]
fn gateway_parity() {
    let dir = tempfile::tempdir().unwrap();
    let registry = ScenarioRegistry::standard().unwrap();
    let kb = registry.get("resonator").unwrap().bundle().knowledge_base().unwrap();
    let config = GatewayConfig {
        kb,
        data_dir: dir.path().to_path_buf(),
        default_model: None,
        clock: "logical".into(),
        max_poll: Duration::from_secs(5),
    };
    let gateway = Arc::new(Gateway::new(config, ScenarioRegistry::standard().unwrap()));
    let (tx, rx) = std::sync::mpsc::channel();
    thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            hal_gateway::serve(listener, gateway).await.unwrap();
        });
    });
    let client = GatewayClient::new(format!("http://{}", rx.recv().unwrap()));
    let scenario = registry.get("resonator").unwrap();
    let seed = 0;
    let cli = run_seed("resonator", seed).report.to_json();
    let http = client.run_scenario(scenario.as_ref(), seed, &Storage::new(dir.path())).unwrap().to_json();
    verdict(
        8,
        "gateway parity",
        cli == http,
        &format!("manual HTTP report {} bytes, auto report {} bytes, identical: {}", http.len(), cli.len(), cli == http),
    );
}
