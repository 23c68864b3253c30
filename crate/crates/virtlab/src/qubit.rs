//! Qubit readout chain with leakage.
//!
//! Per shot the qubit starts in `g`. Readout 0 happens first, then for each
//! `j = 1..=N` an optional pi pulse followed by readout `j`. A pi pulse flips
//! `g <-> e` with probability `1 - p_pi` and does nothing to a leaked qubit.
//! A readout reports the state with assignment error `epsilon` (leaked reads
//! as 1 with probability `leaked_bit_bias`), and only after the bit is
//! recorded may the qubit leak with probability `L`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{LabError, QubitSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRequest {
    pub pi_flags: Vec<bool>,
    pub shots: usize,
    /// Readout power in channel-gain units; selects from the power table.
    #[serde(default)]
    pub power: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResponse {
    /// `shots x (N+1)` readout bits.
    pub bits: Vec<Vec<u8>>,
}

#[derive(Clone, Copy, PartialEq)]
enum State {
    Ground,
    Excited,
    Leaked,
}

const MAX_READOUTS: usize = 50_000_000;

pub fn qubit_sequence(req: &SequenceRequest, qubit: &QubitSpec) -> Result<SequenceResponse, LabError> {
    if req.pi_flags.is_empty() {
        return Err(LabError::BadRequest("pi_flags must not be empty".into()));
    }
    if req.shots == 0 {
        return Err(LabError::BadRequest("shots must be >= 1".into()));
    }
    if req.shots.saturating_mul(req.pi_flags.len() + 1) > MAX_READOUTS {
        return Err(LabError::BadRequest(format!("at most {MAX_READOUTS} readouts per request")));
    }
    qubit.validate()?;
    let (leak, eps) = qubit.at_power(req.power);
    let p_flip = 1.0 - qubit.pi_error;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);

    let readout = |state: &mut State, rng: &mut ChaCha8Rng| -> u8 {
        let bit = match *state {
            State::Leaked => rng.random_bool(qubit.leaked_bit_bias),
            s => (s == State::Excited) ^ rng.random_bool(eps),
        };
        if *state != State::Leaked && rng.random_bool(leak) {
            *state = State::Leaked;
        }
        u8::from(bit)
    };

    let mut bits = Vec::with_capacity(req.shots);
    for _ in 0..req.shots {
        let mut row = Vec::with_capacity(req.pi_flags.len() + 1);
        let mut state = State::Ground;
        row.push(readout(&mut state, &mut rng));
        for &flag in &req.pi_flags {
            if flag && state != State::Leaked && rng.random_bool(p_flip) {
                state = match state {
                    State::Ground => State::Excited,
                    _ => State::Ground,
                };
            }
            row.push(readout(&mut state, &mut rng));
        }
        bits.push(row);
    }
    Ok(SequenceResponse { bits })
}
