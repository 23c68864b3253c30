use hal_virtlab::wire::{decode_frame, encode_frame, Reply, Request, MAX_FRAME};
use hal_virtlab::{SequenceRequest, SequenceResponse, SweepRequest, SweepResponse};
use proptest::prelude::*;
use serde_json::{json, Value};

fn arb_json() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        (-1e300f64..1e300).prop_map(Value::from),
        "[ -~]{0,12}".prop_map(Value::from),
    ];
    leaf.prop_recursive(3, 32, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(Value::Array),
            prop::collection::btree_map("[a-z_]{1,8}", inner, 0..6)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn arb_object() -> impl Strategy<Value = Value> {
    prop::collection::btree_map("[a-z_]{1,8}", arb_json(), 0..6).prop_map(|m| Value::Object(m.into_iter().collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn valid_frames_round_trip(obj in arb_object()) {
        let frame = encode_frame(&obj);
        let (decoded, used) = decode_frame(&frame).unwrap();
        prop_assert_eq!(used, frame.len());
        prop_assert_eq!(encode_frame(&decoded), frame);
    }

    #[test]
    fn decode_is_total(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_frame(&bytes);
    }

    #[test]
    fn decode_with_valid_prefix_is_total(body in prop::collection::vec(any::<u8>(), 0..64)) {
        let mut frame = (body.len() as u32).to_be_bytes().to_vec();
        frame.extend_from_slice(&body);
        let _ = decode_frame(&frame);
    }

    #[test]
    fn requests_round_trip(
        flags in prop::collection::vec(any::<bool>(), 1..20),
        shots in 1usize..10_000,
        seed in any::<u64>(),
        power in prop::option::of(0.0f64..1e5),
    ) {
        let req = Request::Sequence(SequenceRequest { pi_flags: flags, shots, power, seed });
        let frame = encode_frame(&serde_json::to_value(&req).unwrap());
        let (v, _) = decode_frame(&frame).unwrap();
        prop_assert_eq!(serde_json::from_value::<Request>(v).unwrap(), req);
    }

    #[test]
    fn sweep_replies_round_trip(xs in prop::collection::vec(-1e12f64..1e12, 0..30)) {
        let reply = Reply::Sweep(SweepResponse { freq: xs.clone(), s21_re: xs.clone(), s21_im: xs });
        let frame = encode_frame(&reply.to_json());
        let (v, _) = decode_frame(&frame).unwrap();
        prop_assert_eq!(Reply::from_json(v).unwrap(), reply);
    }
}

#[test]
fn sequence_reply_round_trip() {
    let reply = Reply::Sequence(SequenceResponse {
        bits: vec![vec![0, 1, 1], vec![1, 0, 0]],
    });
    let (v, _) = decode_frame(&encode_frame(&reply.to_json())).unwrap();
    assert_eq!(v["ok"], true);
    assert_eq!(Reply::from_json(v).unwrap(), reply);
}

#[test]
fn sweep_request_defaults() {
    let v = json!({"op": "sweep", "f_start": 1e9, "f_stop": 2e9, "points": 3});
    let Request::Sweep(req) = serde_json::from_value::<Request>(v).unwrap() else {
        panic!("expected a sweep");
    };
    assert_eq!(
        req,
        SweepRequest {
            f_start: 1e9,
            f_stop: 2e9,
            points: 3,
            power: 0.0,
            averages: 1,
            seed: 0
        }
    );
}

#[test]
fn frame_limit_is_enforced() {
    let len = (MAX_FRAME as u32 + 1).to_be_bytes();
    assert!(decode_frame(&len).is_err());
}
