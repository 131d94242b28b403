//! Readout simulator for a cavity-assisted off-resonant Raman quantum memory.
//!
//! The pipeline builds a target signal mode, synthesizes the read control
//! that emits it, propagates the two-band field–spin equations and evaluates
//! the second-moment noise budget of the retrieved light.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod noise;
pub mod params;
pub mod quadrature;
pub mod signal;
pub mod sweep;

pub use config::RunConfig;
pub use control::{ControlConfig, ControlSolution};
pub use dynamics::{build_propagator, Drive, PropagatorTable};
pub use error::{Error, Result};
pub use noise::NoiseBudget;
pub use params::{derive_rates, PhysicalParams, RegimeThresholds};
pub use signal::{make_target_mode, SignalMode, TimeGrid};
