//! Readout-induced leakage benchmarking.
//!
//! Each shot is a chain of readouts `b_0 .. b_N` with an optional pi pulse
//! between consecutive readouts. The per-cycle correlation is
//! `C_j = 1` when `b_j xor b_{j-1}` equals the pi flag between them, else `0`.
//! Averaged over shots and randomizations it follows
//!
//! ```text
//! <C>_j = (A + B (1 - L)^j) / 2
//! ```
//!
//! with `L` the leakage probability per readout.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::lm::{forward_jacobian, nlls_curve, LmOptions};
use crate::FitError;

const LOG_FLOOR: f64 = 1e-6;
const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    /// Readout cycle indices, `1..=N`.
    pub j: Vec<usize>,
    pub c_avg: Vec<f64>,
    pub n_samples: Vec<usize>,
    /// Row-major covariance of `c_avg` estimated from the individual shots.
    /// Empty when only the averages are known.
    #[serde(default)]
    pub cov: Vec<f64>,
}

impl CorrelationSeries {
    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }
}

/// Average alternation/pi-flag agreement per cycle index.
///
/// `pi_flags[r]` holds the `N` flags of randomization `r`; `bits[r]` is its
/// `shots x (N+1)` readout matrix.
pub fn correlation_series(pi_flags: &[Vec<bool>], bits: &[Vec<Vec<u8>>]) -> Result<CorrelationSeries, FitError> {
    if pi_flags.len() != bits.len() {
        return Err(FitError::InvalidInput(format!(
            "{} flag sets but {} bit matrices",
            pi_flags.len(),
            bits.len()
        )));
    }
    let Some(first) = pi_flags.first() else {
        return Err(FitError::InvalidInput("no randomizations".into()));
    };
    let n = first.len();
    if n == 0 {
        return Err(FitError::InvalidInput("empty pi flag list".into()));
    }
    let mut matches = vec![0usize; n];
    let mut samples = vec![0usize; n];
    let mut joint = vec![0usize; n * n];
    let mut hit = Vec::with_capacity(n);
    for (r, (flags, matrix)) in pi_flags.iter().zip(bits).enumerate() {
        if flags.len() != n {
            return Err(FitError::InvalidInput(format!(
                "randomization {r} has {} flags, expected {n}",
                flags.len()
            )));
        }
        for (s, shot) in matrix.iter().enumerate() {
            if shot.len() != n + 1 {
                return Err(FitError::InvalidInput(format!(
                    "randomization {r} shot {s} has {} readouts, expected {}",
                    shot.len(),
                    n + 1
                )));
            }
            if shot.iter().any(|&b| b > 1) {
                return Err(FitError::InvalidInput(format!("randomization {r} shot {s} has a non-binary bit")));
            }
            hit.clear();
            for j in 1..=n {
                let alternated = shot[j] != shot[j - 1];
                if alternated == flags[j - 1] {
                    matches[j - 1] += 1;
                    hit.push(j - 1);
                }
                samples[j - 1] += 1;
            }
            for &a in &hit {
                for &b in &hit {
                    joint[a * n + b] += 1;
                }
            }
        }
    }
    if samples[0] == 0 {
        return Err(FitError::InvalidInput("no shots".into()));
    }
    let shots = samples[0] as f64;
    let c_avg: Vec<f64> = matches.iter().zip(&samples).map(|(&m, &s)| m as f64 / s as f64).collect();
    let cov = if shots > 1.0 {
        (0..n * n)
            .map(|i| {
                let (a, b) = (i / n, i % n);
                (joint[i] as f64 / shots - c_avg[a] * c_avg[b]) / (shots - 1.0)
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(CorrelationSeries {
        j: (1..=n).collect(),
        c_avg,
        n_samples: samples,
        cov,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageFit {
    pub a: f64,
    pub b: f64,
    pub l: f64,
    pub sigma_l: f64,
    /// Inclusive cycle-index bounds used by the fit.
    pub j_range: (usize, usize),
    /// True when no decay was resolvable and `L` was pinned to zero.
    pub degenerate: bool,
}

pub fn leakage_model(p: &[f64], j: f64) -> f64 {
    0.5 * (p[0] + p[1] * (1.0 - p[2]).powf(j))
}

struct LinReg {
    slope: f64,
    slope_se: f64,
}

fn linear_regression(x: &[f64], y: &[f64]) -> LinReg {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if x.len() > 2 && sxx > 0.0 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LinReg { slope, slope_se }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// True when the head of the series is not resolvably above its tail.
fn decay_unresolved(c: &[f64], tail: usize) -> bool {
    let diffs: f64 = c.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let noise = (diffs / (2.0 * (c.len() - 1) as f64)).sqrt();
    let drop = mean(&c[..tail]) - mean(&c[c.len() - tail..]);
    drop <= 3.0 * noise * (2.0 / tail as f64).sqrt()
}

/// Variance of `L` propagated from the shot covariance of the averages:
/// `G J^T S J G` with `G = (J^T J)^-1`.
fn sandwich_variance(p: &[f64], j: &[f64], cov: &[f64]) -> Result<Option<f64>, FitError> {
    let n = j.len();
    if cov.len() != n * n {
        return Ok(None);
    }
    let model = |q: &[f64]| j.iter().map(|&x| leakage_model(q, x)).collect::<Vec<_>>();
    let jac = forward_jacobian(&model, p, &model(p))?;
    let g = (jac.transpose() * &jac).try_inverse().ok_or(FitError::Singular)?;
    let s = DMatrix::from_row_slice(n, n, cov);
    let v = &g * jac.transpose() * s * &jac * &g;
    let unit = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    Ok(Some((unit.transpose() * v * unit)[(0, 0)]))
}

/// Fit `<C>_j = (A + B (1-L)^j) / 2` to a correlation series.
pub fn fit_leakage(series: &CorrelationSeries) -> Result<LeakageFit, FitError> {
    let n = series.len();
    if n < MIN_POINTS {
        return Err(FitError::InsufficientData {
            needed: MIN_POINTS,
            got: n,
        });
    }
    if series.c_avg.len() != n {
        return Err(FitError::InvalidInput("j and c_avg lengths differ".into()));
    }
    let j: Vec<f64> = series.j.iter().map(|&v| v as f64).collect();
    let c = &series.c_avg;
    let j_range = (series.j[0], series.j[n - 1]);

    let tail = n.div_ceil(10).max(1);
    let a0 = 2.0 * mean(&c[n - tail..]);
    let excess: Vec<f64> = c.iter().map(|v| 2.0 * v - a0).collect();

    // log-linear pre-fit over the leading run that is still above the floor
    let lead = excess.iter().take_while(|&&e| e > LOG_FLOOR).count();
    let (xs, ys): (Vec<f64>, Vec<f64>) = if lead >= 2 {
        (j[..lead].to_vec(), excess[..lead].iter().map(|e| e.ln()).collect())
    } else {
        (j.clone(), excess.iter().map(|e| e.max(LOG_FLOOR).ln()).collect())
    };
    let pre = linear_regression(&xs, &ys);

    let degenerate = |sigma_l: f64| LeakageFit {
        a: 2.0 * mean(c),
        b: 0.0,
        l: 0.0,
        sigma_l,
        j_range,
        degenerate: true,
    };

    if pre.slope >= -1e-9 || decay_unresolved(c, tail) {
        return Ok(degenerate(pre.slope_se));
    }

    let l0 = (1.0 - pre.slope.exp()).clamp(1e-6, 0.99);
    let b0 = (2.0 * c[0] - a0) / (1.0 - l0).powf(j[0]);
    let fit = nlls_curve(leakage_model, &[a0, b0, l0], &j, c, &LmOptions::default())?;
    let l = fit.params[2];
    if l < 0.0 {
        return Ok(degenerate(pre.slope_se));
    }
    if l > 1.0 {
        return Err(FitError::OutOfBounds { name: "L", value: l });
    }
    let sigma_l = match sandwich_variance(&fit.params, &j, &series.cov)? {
        Some(v) => v.max(0.0).sqrt(),
        None => fit.covariance[(2, 2)].max(0.0).sqrt(),
    };
    Ok(LeakageFit {
        a: fit.params[0],
        b: fit.params[1],
        l,
        sigma_l,
        j_range,
        degenerate: false,
    })
}
