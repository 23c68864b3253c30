use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorSpec {
    /// Resonance frequency in Hz.
    pub f_r: f64,
    pub q_i: f64,
    pub q_c: f64,
    /// Impedance-mismatch angle in radians.
    #[serde(default)]
    pub phi: f64,
}

impl ResonatorSpec {
    pub fn validate(&self) -> Result<(), LabError> {
        let q_ok = |q: f64| (1e2..=1e9).contains(&q);
        if !(self.f_r > 0.0 && self.f_r.is_finite()) {
            return Err(LabError::BadRequest(format!("f_r must be positive, got {}", self.f_r)));
        }
        if !q_ok(self.q_i) || !q_ok(self.q_c) {
            return Err(LabError::BadRequest(format!(
                "quality factors must lie in [1e2, 1e9], got Q_i={} Q_c={}",
                self.q_i, self.q_c
            )));
        }
        if !(self.phi.abs() < FRAC_PI_2) {
            return Err(LabError::BadRequest(format!("phi must lie in (-pi/2, pi/2), got {}", self.phi)));
        }
        Ok(())
    }

    pub fn notch(&self) -> hal_analysis::NotchParams {
        hal_analysis::NotchParams {
            f_r: self.f_r,
            q_i: self.q_i,
            q_c: self.q_c,
            phi: self.phi,
        }
    }
}

/// Complex background `a e^{i alpha} e^{-2 pi i f tau}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Background {
    pub a: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl Default for Background {
    fn default() -> Self {
        Self {
            a: 1.0,
            alpha: 0.0,
            tau: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEntry {
    /// Readout power in channel-gain units (an opaque ordinal).
    pub power: f64,
    pub leak: f64,
    pub assign_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QubitSpec {
    /// Leakage probability per readout.
    pub leak_per_readout: f64,
    pub assign_error: f64,
    pub pi_error: f64,
    /// Probability that a leaked qubit reads as 1.
    pub leaked_bit_bias: f64,
    pub power_table: Vec<PowerEntry>,
}

impl Default for QubitSpec {
    fn default() -> Self {
        Self {
            leak_per_readout: 0.0,
            assign_error: 0.0,
            pi_error: 0.0,
            leaked_bit_bias: 0.5,
            power_table: Vec::new(),
        }
    }
}

fn probability(name: &str, p: f64) -> Result<(), LabError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(LabError::BadRequest(format!("{name} must be a probability, got {p}")))
    }
}

impl QubitSpec {
    pub fn validate(&self) -> Result<(), LabError> {
        probability("leak_per_readout", self.leak_per_readout)?;
        probability("assign_error", self.assign_error)?;
        probability("pi_error", self.pi_error)?;
        probability("leaked_bit_bias", self.leaked_bit_bias)?;
        for e in &self.power_table {
            probability("power_table.leak", e.leak)?;
            probability("power_table.assign_error", e.assign_error)?;
        }
        if self.power_table.windows(2).any(|w| w[1].power <= w[0].power) {
            return Err(LabError::BadRequest("power_table powers must be strictly increasing".into()));
        }
        Ok(())
    }

    /// `(L, epsilon)` at the given power: nearest table entry, or the base values.
    pub fn at_power(&self, power: Option<f64>) -> (f64, f64) {
        match power {
            Some(p) if !self.power_table.is_empty() => {
                let e = self
                    .power_table
                    .iter()
                    .min_by(|a, b| (a.power - p).abs().total_cmp(&(b.power - p).abs()))
                    .expect("non-empty table");
                (e.leak, e.assign_error)
            }
            _ => (self.leak_per_readout, self.assign_error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabConfig {
    pub resonators: Vec<ResonatorSpec>,
    pub background: Background,
    /// Per-point, per-average noise standard deviation in linear S21 units.
    pub noise_sigma: f64,
    pub qubit: QubitSpec,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            resonators: Vec::new(),
            background: Background::default(),
            noise_sigma: 0.003,
            qubit: QubitSpec::default(),
        }
    }
}

impl LabConfig {
    pub fn validate(&self) -> Result<(), LabError> {
        for r in &self.resonators {
            r.validate()?;
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(LabError::BadRequest("noise_sigma must be finite and non-negative".into()));
        }
        self.qubit.validate()
    }
}
