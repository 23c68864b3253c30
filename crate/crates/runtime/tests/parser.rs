use hal_runtime::{parse, Budget, Environment, Script};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: &[&str] = &[
    "x", "y", "STATE", "SIGNAL", "len", "range", "print", "invoke", "str", "if", "elif", "else", "while",
    "for", "in", "and", "or", "not", "true", "false", "null", "=", "==", "!=", "<", "<=", ">", ">=", "+", "-",
    "*", "/", "%", "(", ")", "[", "]", "{", "}", ",", ":", "\n", " ", "#c\n", "\"s\"", "\"a\\\"b\"", "0",
    "1", "2.5", "1e3", "1e999", "1.", "!", "@", "\"unterminated", "\t", "\r\n",
];

fn soup(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(0..40);
    (0..n).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(if rng.random_bool(0.5) { " " } else { "" })
}

fn bytes(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(0..64);
    let raw: Vec<u8> = (0..n).map(|_| rng.random()).collect();
    String::from_utf8_lossy(&raw).into_owned()
}

#[test]
fn fuzzed_inputs_never_crash_the_parser() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parsed = 0;
    for i in 0..100_000 {
        let src = if i % 2 == 0 { soup(&mut rng) } else { bytes(&mut rng) };
        match parse(&src) {
            Ok(program) => {
                parsed += 1;
                let printed = program.to_string();
                assert_eq!(parse(&printed).as_ref(), Ok(&program), "round trip failed for {src:?}");
                let mut env = Environment::new();
                env.set_budget(Budget {
                    max_steps: 5_000,
                    ..Budget::default()
                });
                env.execute(&Script {
                    source: src,
                    program,
                });
            }
            Err(e) => {
                assert!(e.line >= 1 && e.col >= 1, "{e:?} for {src:?}");
            }
        }
    }
    assert!(parsed > 100, "only {parsed} inputs parsed");
}

#[test]
fn deep_nesting_is_rejected_not_overflowed() {
    for src in [
        "(".repeat(100_000),
        format!("x = {}1{}", "[".repeat(5_000), "]".repeat(5_000)),
        format!("x = {}1", "-".repeat(50_000)),
        format!("x = 1{}", " + 1".repeat(50_000)),
        "if true {".repeat(10_000),
    ] {
        assert!(parse(&src).is_err());
    }
}

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "freq", "x_1"]).prop_map(str::to_string)
}

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| n.to_string()),
        (-1e6f64..1e6).prop_map(|x| format!("{x:?}")),
        "[a-z ]{0,6}".prop_map(|s| format!("{s:?}")),
        Just("true".to_string()),
        Just("null".to_string()),
        ident(),
        Just("STATE[\"k\"]".to_string()),
        Just("SIGNAL".to_string()),
    ];
    leaf.prop_recursive(4, 32, 4, |inner| {
        let op = prop::sample::select(vec!["+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "and", "or"]);
        prop_oneof![
            (inner.clone(), op, inner.clone()).prop_map(|(l, o, r)| format!("({l} {o} {r})")),
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "%", "and", "or"]), inner.clone())
                .prop_map(|(l, o, r)| format!("{l} {o} {r}")),
            inner.clone().prop_map(|e| format!("(not {e})")),
            inner.clone().prop_map(|e| format!("-({e})")),
            prop::collection::vec(inner.clone(), 0..3).prop_map(|v| format!("[{}]", v.join(", "))),
            prop::collection::vec(inner.clone(), 0..3).prop_map(|v| {
                let entries: Vec<_> = v.iter().enumerate().map(|(i, e)| format!("\"k{i}\": {e}")).collect();
                format!("{{{}}}", entries.join(", "))
            }),
            (inner.clone(), inner.clone()).prop_map(|(t, i)| format!("{t}[{i}]")),
            prop::collection::vec(inner, 0..3).prop_map(|v| format!("len({})", v.join(", "))),
        ]
    })
}

fn stmt() -> impl Strategy<Value = String> {
    let simple = prop_oneof![
        (ident(), expr()).prop_map(|(v, e)| format!("{v} = {e}")),
        expr().prop_map(|e| format!("STATE[\"k\"] = {e}")),
        expr().prop_map(|e| format!("SIGNAL = {e}")),
        expr(),
    ];
    simple.prop_recursive(3, 24, 3, |inner| {
        let block = prop::collection::vec(inner, 0..3).prop_map(|b| format!("{{\n{}\n}}", b.join("\n")));
        prop_oneof![
            (expr(), block.clone(), prop::option::of(block.clone()))
                .prop_map(|(c, b, e)| match e {
                    Some(e) => format!("if {c} {b} else {e}"),
                    None => format!("if {c} {b}"),
                }),
            (expr(), block.clone(), expr(), block.clone())
                .prop_map(|(c, b, c2, b2)| format!("if {c} {b} elif {c2} {b2}")),
            (expr(), block.clone()).prop_map(|(c, b)| format!("while {c} {b}")),
            (ident(), expr(), block).prop_map(|(v, e, b)| format!("for {v} in {e} {b}")),
        ]
    })
}

proptest! {
    #[test]
    fn pretty_print_round_trips(body in prop::collection::vec(stmt(), 0..6)) {
        let src = body.join("\n");
        let program = parse(&src).map_err(|e| TestCaseError::fail(format!("{e} in {src}")))?;
        let printed = program.to_string();
        let again = parse(&printed).map_err(|e| TestCaseError::fail(format!("{e} in printed {printed}")))?;
        prop_assert_eq!(&again, &program);
        prop_assert_eq!(again.to_string(), printed);
    }
}

#[test]
fn resonator_analysis_script_round_trips() {
    let src = r#"
# count and fit every dip in the stored sweep
data = load_dataset(STATE["data_file"])
cols = data["columns"]
f_list = find_resonances(cols["freq"], cols["s21_re"], cols["s21_im"])
STATE["f_list"] = f_list
STATE["Qi_list"] = []
STATE["Qc_list"] = []
for f in f_list {
    span = f / 1e4
    fine = vna_sweep(f - span, f + span, 401, -20, 10, 3)
    fit = fit_resonator(fine["freq"], fine["s21_re"], fine["s21_im"])
    STATE["Qi_list"] = STATE["Qi_list"] + [fit["Q_i"]]
    STATE["Qc_list"] = STATE["Qc_list"] + [fit["Q_c"]]
}
if len(f_list) == 0 {
    SIGNAL = "No resonances found"
} elif len(f_list) == 1 {
    SIGNAL = "Found 1 resonance"
} else {
    SIGNAL = "Found " + str(len(f_list)) + " resonances"
}
"#;
    let program = parse(src).unwrap();
    assert_eq!(program.body.len(), 8);
    assert_eq!(parse(&program.to_string()).unwrap(), program);
}
