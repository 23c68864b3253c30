use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("singular normal equations after damping escalation")]
    Singular,
    #[error("non-finite residual encountered: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no resonance: dip depth {depth_db:.3} dB is below 0.5 dB")]
    NoResonance { depth_db: f64 },
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("fitted parameter {name} = {value} outside its physical bounds")]
    OutOfBounds { name: &'static str, value: f64 },
}
