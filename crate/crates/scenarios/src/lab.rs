use std::sync::Arc;

use hal_virtlab::{Lab, LabError, SequenceRequest, SequenceResponse, SweepRequest, SweepResponse};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mixes a run seed into every request seed, so one script yields a fresh
/// but reproducible noise realization per run.
pub struct ReseededLab {
    inner: Arc<dyn Lab>,
    seed: u64,
}

impl ReseededLab {
    pub fn new(inner: Arc<dyn Lab>, seed: u64) -> Self {
        Self { inner, seed }
    }

    fn mix(&self, request_seed: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(request_seed);
        rng.next_u64()
    }
}

impl Lab for ReseededLab {
    fn sweep(&self, req: &SweepRequest) -> Result<SweepResponse, LabError> {
        self.inner.sweep(&SweepRequest {
            seed: self.mix(req.seed),
            ..req.clone()
        })
    }

    fn sequence(&self, req: &SequenceRequest) -> Result<SequenceResponse, LabError> {
        self.inner.sequence(&SequenceRequest {
            seed: self.mix(req.seed),
            ..req.clone()
        })
    }

    fn requests(&self) -> u64 {
        self.inner.requests()
    }

    fn describe(&self) -> String {
        format!("{} (run seed {})", self.inner.describe(), self.seed)
    }
}
