//! Knowledge base, model adapters and the session engine.
//!
//! A [`engine::Session`] advances in cycles. Each cycle the planner reads the
//! protocol documents found by [`kb::iterative_search`] together with the
//! session history and names the next step; the developer turns that step into
//! a script for the experiment runtime; the script runs (immediately, or after
//! approval in manual mode) and its signal is recorded for the next plan.

pub mod engine;
pub mod events;
pub mod kb;
pub mod model;
