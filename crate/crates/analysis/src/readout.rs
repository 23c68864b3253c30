use serde::{Deserialize, Serialize};

use crate::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutMetrics {
    /// `P(1 | prepared excited) - P(1 | prepared ground)`.
    pub visibility: f64,
    /// Fraction of back-to-back readout pairs that agree.
    pub repeatability: f64,
}

fn ones_fraction(bits: &[u8]) -> f64 {
    bits.iter().filter(|&&b| b != 0).count() as f64 / bits.len() as f64
}

pub fn readout_metrics(prep0_bits: &[u8], prep1_bits: &[u8], pairs: &[(u8, u8)]) -> Result<ReadoutMetrics, FitError> {
    if prep0_bits.is_empty() || prep1_bits.is_empty() || pairs.is_empty() {
        return Err(FitError::InvalidInput("readout metrics need non-empty samples".into()));
    }
    let agree = pairs.iter().filter(|(a, b)| (*a != 0) == (*b != 0)).count();
    Ok(ReadoutMetrics {
        visibility: ones_fraction(prep1_bits) - ones_fraction(prep0_bits),
        repeatability: agree as f64 / pairs.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_readout() {
        let m = readout_metrics(&[0, 0, 0], &[1, 1], &[(1, 1), (0, 0)]).unwrap();
        assert_eq!(m.visibility, 1.0);
        assert_eq!(m.repeatability, 1.0);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(readout_metrics(&[], &[1], &[(0, 0)]).is_err());
        assert!(readout_metrics(&[0], &[1], &[]).is_err());
    }

    #[test]
    fn partial_agreement() {
        let m = readout_metrics(&[0, 1, 0, 0], &[1, 1, 0, 1], &[(1, 0), (0, 0), (1, 1), (0, 1)]).unwrap();
        assert!((m.visibility - 0.5).abs() < 1e-15);
        assert!((m.repeatability - 0.5).abs() < 1e-15);
    }
}
