//! Simulation and analysis of queue-based random-access (CSMA-style) wireless
//! networks.
//!
//! The crate is organised around the objects of the model:
//!
//! - [`graph`]: interference graphs, schedules, capacity-region membership,
//!   set covers and the k-duplicate construction.
//! - [`stochastic`]: the exact pre-limit process, simulated as the uniformized
//!   jump chain, together with its fluid-scaled trace.
//! - [`fluid`]: random piecewise-linear fluid paths for complete partite
//!   ("diamond") and broken-diamond networks.
//! - [`fastmix`]: the smooth deterministic regime (schedule distribution over
//!   maximum independent sets, service fractions, drift ODE).
//! - [`analysis`]: instability constants, period detection, cycle statistics
//!   and Monte Carlo estimators.
//! - [`io`]: CSV and sidecar writers shared by the command line tool.
//! - [`config`] and [`presets`]: experiment descriptions.

pub mod analysis;
pub mod config;
pub mod error;
pub mod fastmix;
pub mod fluid;
pub mod graph;
pub mod io;
mod lp;
pub mod presets;
pub mod stats;
pub mod stochastic;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use graph::{CapacityStatus, CapacityVerdict, InterferenceGraph, Schedule};
pub use stochastic::{NodeDynamics, SystemState, Trace};
pub use fluid::{FluidPath, FluidSegment, Period};
pub use analysis::{CycleStats, InstabilityConstants};
pub use config::ExperimentConfig;
