//! Multi-person tracking with a re-identification gate.
//!
//! A tracker ([`trackers`]) links detections frame to frame; the
//! [`pipeline`] then applies three trigger rules that call the appearance
//! classifier ([`reid`]) to repair identities. [`eval`] scores the result
//! against ground truth and [`synth`] generates deterministic scenarios with
//! crossings and exits.

pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod primitives;
pub mod reid;
pub mod synth;
pub mod trackers;

pub use error::{Error, Result};
