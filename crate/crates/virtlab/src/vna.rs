use std::f64::consts::PI;

use hal_analysis::notch_factor;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Background, LabConfig, LabError, ResonatorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRequest {
    pub f_start: f64,
    pub f_stop: f64,
    pub points: usize,
    /// Source power in dBm. The simulated chain is linear, so this is recorded only.
    #[serde(default)]
    pub power: f64,
    #[serde(default = "one")]
    pub averages: u32,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResponse {
    pub freq: Vec<f64>,
    pub s21_re: Vec<f64>,
    pub s21_im: Vec<f64>,
}

/// Noiseless transmission through the background and every resonator.
pub fn s21_response(f: f64, resonators: &[ResonatorSpec], background: &Background) -> Complex64 {
    let bg = Complex64::from_polar(background.a, background.alpha)
        * Complex64::from_polar(1.0, -2.0 * PI * f * background.tau);
    resonators
        .iter()
        .fold(bg, |acc, r| acc * notch_factor(f, &r.notch()))
}

impl SweepRequest {
    pub fn validate(&self) -> Result<(), LabError> {
        if !(self.f_start.is_finite() && self.f_stop.is_finite() && self.f_start > 0.0 && self.f_start < self.f_stop) {
            return Err(LabError::BadRequest(format!(
                "need 0 < f_start < f_stop, got [{}, {}]",
                self.f_start, self.f_stop
            )));
        }
        if self.points < 2 {
            return Err(LabError::BadRequest(format!("points must be >= 2, got {}", self.points)));
        }
        if self.points > 10_000_000 {
            return Err(LabError::BadRequest(format!("points limited to 1e7, got {}", self.points)));
        }
        if self.averages < 1 {
            return Err(LabError::BadRequest("averages must be >= 1".into()));
        }
        Ok(())
    }
}

/// Uniform-grid sweep with Gaussian noise of std `sigma / sqrt(averages)`
/// on both quadratures.
pub fn vna_sweep(req: &SweepRequest, lab: &LabConfig) -> Result<SweepResponse, LabError> {
    req.validate()?;
    let step = (req.f_stop - req.f_start) / (req.points - 1) as f64;
    let sigma = lab.noise_sigma / f64::from(req.averages).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| LabError::BadRequest(e.to_string()))?;

    let mut freq = Vec::with_capacity(req.points);
    let mut s21_re = Vec::with_capacity(req.points);
    let mut s21_im = Vec::with_capacity(req.points);
    for i in 0..req.points {
        let f = if i + 1 == req.points {
            req.f_stop
        } else {
            req.f_start + step * i as f64
        };
        let z = s21_response(f, &lab.resonators, &lab.background);
        freq.push(f);
        if sigma > 0.0 {
            s21_re.push(z.re + noise.sample(&mut rng));
            s21_im.push(z.im + noise.sample(&mut rng));
        } else {
            s21_re.push(z.re);
            s21_im.push(z.im);
        }
    }
    Ok(SweepResponse { freq, s21_re, s21_im })
}
