use std::io::{Read, Write};
use std::net::TcpStream;
use std::thread;

use hal_virtlab::wire::{decode_frame, encode_frame};
use hal_virtlab::{
    connect, serve, vna_sweep, Lab, LabConfig, LabError, LocalLab, QubitSpec, RemoteLab, ResonatorSpec,
    SequenceRequest, SweepRequest,
};
use serde_json::Value;

fn config() -> LabConfig {
    LabConfig {
        resonators: vec![ResonatorSpec {
            f_r: 5e9,
            q_i: 2e5,
            q_c: 2e4,
            phi: 0.1,
        }],
        qubit: QubitSpec {
            leak_per_readout: 0.1,
            assign_error: 0.02,
            ..QubitSpec::default()
        },
        ..LabConfig::default()
    }
}

fn sweep(seed: u64, points: usize) -> SweepRequest {
    SweepRequest {
        f_start: 4.99e9,
        f_stop: 5.01e9,
        points,
        power: -30.0,
        averages: 4,
        seed,
    }
}

fn read_reply(stream: &mut TcpStream) -> Value {
    let mut len = [0u8; 4];
    stream.read_exact(&mut len).unwrap();
    let mut body = vec![0u8; u32::from_be_bytes(len) as usize];
    stream.read_exact(&mut body).unwrap();
    let mut frame = len.to_vec();
    frame.extend(body);
    decode_frame(&frame).unwrap().0
}

#[test]
fn sweep_over_tcp_returns_requested_length() {
    let server = serve("127.0.0.1:0", config()).unwrap();
    let lab = RemoteLab::new(server.addr().to_string());
    let resp = lab.sweep(&sweep(1, 257)).unwrap();
    assert_eq!(resp.freq.len(), 257);
    assert_eq!(resp.s21_re.len(), 257);
    assert_eq!(resp.s21_im.len(), 257);
    assert_eq!(resp, vna_sweep(&sweep(1, 257), &config()).unwrap());
    assert_eq!(lab.requests(), 1);
}

#[test]
fn concurrent_clients_get_seed_deterministic_replies() {
    let server = serve("127.0.0.1:0", config()).unwrap();
    let endpoint = server.endpoint();
    let local = LocalLab::new(config()).unwrap();
    let handles: Vec<_> = (0..4u64)
        .map(|seed| {
            let endpoint = endpoint.clone();
            thread::spawn(move || {
                let lab = connect(&endpoint).unwrap();
                let mut out = Vec::new();
                for _ in 0..5 {
                    let s = lab.sweep(&sweep(seed, 101)).unwrap();
                    let q = lab
                        .sequence(&SequenceRequest {
                            pi_flags: vec![true, false, true],
                            shots: 50,
                            power: None,
                            seed,
                        })
                        .unwrap();
                    out.push((s, q));
                }
                (seed, out)
            })
        })
        .collect();
    for h in handles {
        let (seed, out) = h.join().unwrap();
        let expected_sweep = local.sweep(&sweep(seed, 101)).unwrap();
        let expected_seq = local
            .sequence(&SequenceRequest {
                pi_flags: vec![true, false, true],
                shots: 50,
                power: None,
                seed,
            })
            .unwrap();
        for (s, q) in out {
            assert_eq!(s, expected_sweep);
            assert_eq!(q, expected_seq);
        }
    }
}

#[test]
fn garbage_frame_gets_bad_request_and_connection_survives() {
    let server = serve("127.0.0.1:0", config()).unwrap();
    let mut stream = TcpStream::connect(server.addr()).unwrap();

    let junk = b"not json at all";
    let mut frame = (junk.len() as u32).to_be_bytes().to_vec();
    frame.extend_from_slice(junk);
    stream.write_all(&frame).unwrap();
    let reply = read_reply(&mut stream);
    assert_eq!(reply["ok"], false);
    assert_eq!(reply["code"], "bad_request");

    stream
        .write_all(&encode_frame(&serde_json::json!({"op": "teleport"})))
        .unwrap();
    assert_eq!(read_reply(&mut stream)["code"], "bad_request");

    stream
        .write_all(&encode_frame(&serde_json::json!({"op": "sweep", "f_start": 2e9, "f_stop": 1e9, "points": 5})))
        .unwrap();
    assert_eq!(read_reply(&mut stream)["code"], "bad_request");

    let ok = serde_json::to_value(hal_virtlab::wire::Request::Sweep(sweep(3, 11))).unwrap();
    stream.write_all(&encode_frame(&ok)).unwrap();
    let reply = read_reply(&mut stream);
    assert_eq!(reply["ok"], true);
    assert_eq!(reply["freq"].as_array().unwrap().len(), 11);
}

#[test]
fn remote_errors_map_to_lab_errors() {
    let server = serve("127.0.0.1:0", config()).unwrap();
    let lab = RemoteLab::new(server.addr().to_string());
    let err = lab
        .sequence(&SequenceRequest {
            pi_flags: vec![],
            shots: 1,
            power: None,
            seed: 0,
        })
        .unwrap_err();
    assert!(matches!(err, LabError::BadRequest(_)));
    assert!(lab.sweep(&sweep(0, 5)).is_ok());
}

#[test]
fn remote_lab_reconnects_after_server_restart() {
    let server = serve("127.0.0.1:0", config()).unwrap();
    let addr = server.addr();
    let lab = RemoteLab::new(addr.to_string());
    assert!(lab.sweep(&sweep(0, 5)).is_ok());
    server.shutdown();
    let _ = lab.sweep(&sweep(0, 5));
    let Ok(server) = serve(addr, config()) else {
        return;
    };
    assert!(lab.sweep(&sweep(0, 5)).is_ok());
    drop(server);
}

#[test]
fn unreachable_lab_is_a_transport_error() {
    let server = serve("127.0.0.1:0", config()).unwrap();
    let addr = server.addr();
    server.shutdown();
    let lab = RemoteLab::new(addr.to_string());
    assert!(matches!(lab.sweep(&sweep(0, 5)), Err(LabError::Transport(_))));
}

#[test]
fn endpoint_parsing() {
    assert_eq!(connect("local").unwrap().describe(), "local");
    assert_eq!(connect("tcp://127.0.0.1:9").unwrap().describe(), "tcp://127.0.0.1:9");
    assert!(connect("udp://x").is_err());
    assert!(connect("tcp://").is_err());
}

#[test]
fn registry_accepts_custom_schemes() {
    let mut reg = hal_virtlab::LabRegistry::standard();
    reg.register("fixed", |rest| {
        assert_eq!(rest, "cfg");
        Ok(std::sync::Arc::new(hal_virtlab::LocalLab::new(hal_virtlab::LabConfig::default())?))
    });
    assert_eq!(reg.schemes().collect::<Vec<_>>(), ["fixed", "local", "tcp"]);
    assert_eq!(reg.open("fixed:cfg").unwrap().describe(), "local");
    assert_eq!(reg.open("fixed://cfg").unwrap().describe(), "local");
    assert!(reg.open("nope:x").is_err());
}
