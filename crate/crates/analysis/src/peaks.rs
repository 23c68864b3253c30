use serde::{Deserialize, Serialize};

use crate::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakOptions {
    /// Minimum depth below the running-median baseline, in dB.
    pub prominence_db: f64,
    pub min_separation_pts: usize,
    pub baseline_window_pts: usize,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            prominence_db: 1.0,
            min_separation_pts: 50,
            baseline_window_pts: 201,
        }
    }
}

fn running_median(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut scratch = Vec::with_capacity(window);
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            scratch.clear();
            scratch.extend_from_slice(&values[lo..hi]);
            let mid = scratch.len() / 2;
            let (_, m, _) = scratch.select_nth_unstable_by(mid, f64::total_cmp);
            *m
        })
        .collect()
}

/// Locate notch resonances in a magnitude trace.
///
/// The trace is converted to dB, a running median is subtracted, and local
/// minima at least `prominence_db` below the baseline are kept, deepest
/// first, subject to the minimum separation. Returned frequencies ascend.
pub fn find_resonances(freq: &[f64], s21_mag: &[f64], opts: &PeakOptions) -> Result<Vec<f64>, FitError> {
    if freq.len() != s21_mag.len() {
        return Err(FitError::InvalidInput(format!(
            "freq has {} points but magnitude has {}",
            freq.len(),
            s21_mag.len()
        )));
    }
    let window = opts.baseline_window_pts.max(1);
    if freq.len() < window {
        return Err(FitError::InsufficientData {
            needed: window,
            got: freq.len(),
        });
    }
    if s21_mag.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(FitError::Domain("magnitude must be finite and non-negative".into()));
    }
    let db: Vec<f64> = s21_mag
        .iter()
        .map(|m| 20.0 * m.max(f64::MIN_POSITIVE).log10())
        .collect();
    let baseline = running_median(&db, window);
    let resid: Vec<f64> = db.iter().zip(&baseline).map(|(d, b)| d - b).collect();

    let mut candidates: Vec<usize> = (1..resid.len().saturating_sub(1))
        .filter(|&i| resid[i] <= resid[i - 1] && resid[i] < resid[i + 1] && -resid[i] >= opts.prominence_db)
        .collect();
    candidates.sort_by(|&a, &b| resid[a].total_cmp(&resid[b]).then(a.cmp(&b)));

    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        if accepted.iter().all(|&a| a.abs_diff(c) >= opts.min_separation_pts) {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    Ok(accepted.into_iter().map(|i| freq[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_trace_has_no_candidates() {
        let f: Vec<f64> = (0..500).map(f64::from).collect();
        let m = vec![0.9; 500];
        assert!(find_resonances(&f, &m, &PeakOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let err = find_resonances(&[1.0; 300], &[1.0; 299], &PeakOptions::default()).unwrap_err();
        assert!(matches!(err, FitError::InvalidInput(_)));
    }

    #[test]
    fn two_separated_dips_are_found_in_order() {
        let f: Vec<f64> = (0..1000).map(f64::from).collect();
        let mut m = vec![1.0; 1000];
        m[700] = 0.1;
        m[699] = 0.5;
        m[701] = 0.5;
        m[250] = 0.3;
        let found = find_resonances(&f, &m, &PeakOptions::default()).unwrap();
        assert_eq!(found, vec![250.0, 700.0]);
    }

    #[test]
    fn close_dips_collapse_to_the_deeper_one() {
        let f: Vec<f64> = (0..1000).map(f64::from).collect();
        let mut m = vec![1.0; 1000];
        m[500] = 0.2;
        m[520] = 0.1;
        let found = find_resonances(&f, &m, &PeakOptions::default()).unwrap();
        assert_eq!(found, vec![520.0]);
    }

    #[test]
    fn shallow_dip_below_prominence_is_ignored() {
        let f: Vec<f64> = (0..400).map(f64::from).collect();
        let mut m = vec![1.0; 400];
        m[200] = 0.95; // -0.45 dB
        assert!(find_resonances(&f, &m, &PeakOptions::default()).unwrap().is_empty());
    }
}
