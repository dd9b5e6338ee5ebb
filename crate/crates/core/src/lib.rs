//! Simulator and algorithms for queue-tail-aware V2V power allocation.
//!
//! Vehicle pairs move on a Manhattan grid, share resource blocks assigned by
//! spectral clustering, and pick transmit powers each slot by a Lyapunov
//! drift-plus-penalty rule. Two rules track the network-wide maximal queue:
//! one through a roadside unit that sees every queue, one through each pair's
//! local extreme-value estimate. A constant-rate baseline serves as reference.

// `!(x > 0.0)` deliberately rejects NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod channel;
pub mod clustering;
pub mod config;
pub mod engine;
pub mod error;
pub mod evt;
pub mod mobility;
pub mod power;
pub mod queueing;
pub mod report;
pub mod scheme;
pub mod stats;

pub use config::ExperimentConfig;
pub use engine::{run_experiment, run_simulation, RunReport, Simulation};
pub use error::{Error, Result};
pub use scheme::{PowerScheme, SchemeRegistry};
