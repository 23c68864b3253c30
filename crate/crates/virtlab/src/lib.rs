//! A simulated superconducting-circuit lab.
//!
//! Two instruments are modelled: a vector network analyzer sweeping a chain
//! of notch resonators, and a qubit readout chain with assignment errors,
//! imperfect pi pulses and readout-induced leakage. Both are pure functions
//! of `(request, config, seed)`. They are reachable in-process through
//! [`LocalLab`] or over TCP through [`serve`] and [`RemoteLab`].
//!
//! [`Storage`] is the dataset store shared by the lab and the analysis code.

mod client;
mod config;
mod error;
pub mod qubit;
mod registry;
mod server;
pub mod storage;
pub mod vna;
pub mod wire;

pub use client::{connect, Lab, LocalLab, RemoteLab};
pub use config::{Background, LabConfig, PowerEntry, QubitSpec, ResonatorSpec};
pub use error::LabError;
pub use registry::LabRegistry;
pub use qubit::{qubit_sequence, SequenceRequest, SequenceResponse};
pub use server::{serve, LabServer};
pub use storage::{Dataset, Scalar, Storage, StorageError};
pub use vna::{s21_response, vna_sweep, SweepRequest, SweepResponse};
