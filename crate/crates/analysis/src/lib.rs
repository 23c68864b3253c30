//! Numerical core for the lab orchestrator: peak finding on VNA traces,
//! a Levenberg-Marquardt least-squares solver, notch-resonator fitting,
//! leakage-benchmark correlation analysis and readout fidelity metrics.
//!
//! Everything here is a pure function of its inputs.

mod error;
pub mod leakage;
pub mod lm;
pub mod peaks;
pub mod readout;
pub mod resonator;

pub use error::FitError;
pub use leakage::{correlation_series, fit_leakage, leakage_model, CorrelationSeries, LeakageFit};
pub use lm::{forward_jacobian, nlls, nlls_curve, LmOptions, NllsFit};
pub use peaks::{find_resonances, PeakOptions};
pub use readout::{readout_metrics, ReadoutMetrics};
pub use resonator::{fit_resonator, guess_resonator, notch_factor, NotchParams, ResonatorFit, ResonatorParams};
