//! Notch-type resonator model and its fitter.
//!
//! The transmission of a single notch resonator is
//!
//! ```text
//! S21(f) = a e^{i alpha} [1 - (Q_l/Q_c) e^{i phi} / (1 + 2i Q_l (f - f_r)/f_r)]
//! 1/Q_l  = 1/Q_i + 1/Q_c
//! ```
//!
//! The simulator multiplies one such factor per resonator onto a common
//! background, so the fitter and the simulator agree on every parameter.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lm::{nlls, LmOptions};
use crate::FitError;

pub const Q_MIN: f64 = 1e2;
pub const Q_MAX: f64 = 1e9;

/// Intrinsic parameters of one notch resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchParams {
    pub f_r: f64,
    pub q_i: f64,
    pub q_c: f64,
    pub phi: f64,
}

impl NotchParams {
    pub fn loaded_q(&self) -> f64 {
        1.0 / (1.0 / self.q_i + 1.0 / self.q_c)
    }
}

/// The bracketed notch factor of the model, without background.
pub fn notch_factor(f: f64, p: &NotchParams) -> Complex64 {
    let q_l = p.loaded_q();
    let coupling = Complex64::from_polar(q_l / p.q_c, p.phi);
    let detuning = Complex64::new(1.0, 2.0 * q_l * (f - p.f_r) / p.f_r);
    Complex64::new(1.0, 0.0) - coupling / detuning
}

/// Full single-resonator parameter set, including the complex background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    pub f_r: f64,
    pub q_i: f64,
    pub q_c: f64,
    pub phi: f64,
    pub a: f64,
    pub alpha: f64,
}

impl ResonatorParams {
    pub fn notch(&self) -> NotchParams {
        NotchParams {
            f_r: self.f_r,
            q_i: self.q_i,
            q_c: self.q_c,
            phi: self.phi,
        }
    }

    pub fn s21(&self, f: f64) -> Complex64 {
        Complex64::from_polar(self.a, self.alpha) * notch_factor(f, &self.notch())
    }

    fn to_vec(self) -> Vec<f64> {
        vec![self.f_r, self.q_i, self.q_c, self.phi, self.a, self.alpha]
    }

    fn from_slice(p: &[f64]) -> Self {
        Self {
            f_r: p[0],
            q_i: p[1],
            q_c: p[2],
            phi: p[3],
            a: p[4],
            alpha: p[5],
        }
    }
}

const PARAM_NAMES: [&str; 6] = ["f_r", "Q_i", "Q_c", "phi", "a", "alpha"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorFit {
    pub f_r: f64,
    pub q_i: f64,
    pub q_c: f64,
    pub phi: f64,
    pub a: f64,
    pub alpha: f64,
    pub residual_rms: f64,
    /// One-sigma standard errors keyed by parameter name.
    pub sigma: BTreeMap<String, f64>,
}

impl ResonatorFit {
    pub fn params(&self) -> ResonatorParams {
        ResonatorParams {
            f_r: self.f_r,
            q_i: self.q_i,
            q_c: self.q_c,
            phi: self.phi,
            a: self.a,
            alpha: self.alpha,
        }
    }
}

fn wrap_angle(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    } else if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Initial guess from the trace shape: dip position, half-power width,
/// edge level and dip depth.
pub fn guess_resonator(freq: &[f64], s21: &[Complex64]) -> Result<ResonatorParams, FitError> {
    let n = freq.len();
    let mags: Vec<f64> = s21.iter().map(|z| z.norm()).collect();
    let (i_min, &m_min) = mags
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty trace");

    let edge = (n / 20).max(1);
    let edge_sum: Complex64 = s21[..edge].iter().chain(&s21[n - edge..]).sum();
    let edge_mean = edge_sum / (2 * edge) as f64;
    let a = edge_mean.norm();
    let alpha = edge_mean.arg();

    let depth_db = 20.0 * (a / m_min.max(f64::MIN_POSITIVE)).log10();
    if !(depth_db >= 0.5) {
        return Err(FitError::NoResonance { depth_db });
    }

    let f_r = freq[i_min];
    let half_power = 0.5 * (m_min * m_min + a * a);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = i_min;
        for i in range {
            let p = mags[i] * mags[i];
            if p >= half_power {
                let p_prev = mags[prev] * mags[prev];
                let t = (half_power - p_prev) / (p - p_prev);
                return Some(freq[prev] + t * (freq[i] - freq[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..i_min).rev());
    let right = crossing(&mut (i_min + 1..n));
    let width = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (f_r - l),
        (None, Some(r)) => 2.0 * (r - f_r),
        (None, None) => freq[n - 1] - freq[0],
    };
    let q_l = f_r / width.max(f64::MIN_POSITIVE);
    let ratio = (1.0 - m_min / a).clamp(1e-3, 0.999);
    let q_c = q_l / ratio;
    let q_i = q_l / (1.0 - ratio);
    Ok(ResonatorParams {
        f_r,
        q_i,
        q_c,
        phi: 0.0,
        a,
        alpha,
    })
}

/// Fit the single-resonator model to a complex trace.
///
/// Residuals are the stacked real and imaginary parts of `model - data`.
pub fn fit_resonator(
    freq: &[f64],
    s21_re: &[f64],
    s21_im: &[f64],
    guess: Option<ResonatorParams>,
) -> Result<ResonatorFit, FitError> {
    if freq.len() != s21_re.len() || freq.len() != s21_im.len() {
        return Err(FitError::InvalidInput(format!(
            "array lengths differ: freq {}, re {}, im {}",
            freq.len(),
            s21_re.len(),
            s21_im.len()
        )));
    }
    if freq.len() < 8 {
        return Err(FitError::InsufficientData {
            needed: 8,
            got: freq.len(),
        });
    }
    let data: Vec<Complex64> = s21_re
        .iter()
        .zip(s21_im)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    if freq.iter().chain(s21_re).chain(s21_im).any(|v| !v.is_finite()) {
        return Err(FitError::Domain("non-finite input sample".into()));
    }
    let start = match guess {
        Some(g) => g,
        None => guess_resonator(freq, &data)?,
    };

    let residuals = |p: &[f64]| -> Vec<f64> {
        let model = ResonatorParams::from_slice(p);
        let mut r = Vec::with_capacity(2 * freq.len());
        for (&f, z) in freq.iter().zip(&data) {
            let d = model.s21(f) - z;
            r.push(d.re);
            r.push(d.im);
        }
        r
    };
    let fit = nlls(residuals, &start.to_vec(), &LmOptions::default())?;
    let mut p = ResonatorParams::from_slice(&fit.params);
    if p.a < 0.0 {
        p.a = -p.a;
        p.alpha += PI;
    }
    p.alpha = wrap_angle(p.alpha);

    for (name, value) in [("Q_i", p.q_i), ("Q_c", p.q_c)] {
        if !(Q_MIN..=Q_MAX).contains(&value) {
            return Err(FitError::OutOfBounds { name, value });
        }
    }
    if !(p.phi.abs() < PI / 2.0) {
        return Err(FitError::OutOfBounds {
            name: "phi",
            value: p.phi,
        });
    }

    let sigma = PARAM_NAMES
        .iter()
        .zip(fit.std_errors())
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    Ok(ResonatorFit {
        f_r: p.f_r,
        q_i: p.q_i,
        q_c: p.q_c,
        phi: p.phi,
        a: p.a,
        alpha: p.alpha,
        residual_rms: fit.residual_rms,
        sigma,
    })
}
