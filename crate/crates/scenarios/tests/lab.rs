use std::sync::Arc;

use hal_scenarios::{load_lab, ReseededLab};
use hal_virtlab::{Lab, LocalLab, SequenceRequest};

fn lab(seed: u64) -> ReseededLab {
    ReseededLab::new(Arc::new(LocalLab::new(load_lab("qnd.toml").unwrap()).unwrap()), seed)
}

fn request(seed: u64) -> SequenceRequest {
    SequenceRequest { pi_flags: vec![true, false, true, true], shots: 200, power: None, seed }
}

#[test]
fn same_run_seed_same_bits() {
    assert_eq!(lab(3).sequence(&request(1)).unwrap(), lab(3).sequence(&request(1)).unwrap());
}

#[test]
fn run_seed_and_request_seed_both_matter() {
    let base = lab(3).sequence(&request(1)).unwrap();
    assert_ne!(base, lab(4).sequence(&request(1)).unwrap());
    assert_ne!(base, lab(3).sequence(&request(2)).unwrap());
}

#[test]
fn describe_names_the_run_seed() {
    assert_eq!(lab(1).describe(), "local (run seed 1)");
}
