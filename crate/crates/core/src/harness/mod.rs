//! Scenario configs, the closed-loop simulation engine, sweeps, metrics, and
//! trace persistence.

pub mod config;
pub mod crank;
pub mod metrics;
pub mod scenario;
pub mod sweep;
pub mod trace;

pub use config::{ScenarioConfig, ScenarioKind};
pub use crank::{crank_angle, CrankSlider};
pub use metrics::{metrics, MetricsReport};
pub use scenario::{execute, run_scenario, simulate, ScenarioRun};
pub use sweep::{calibrate_play_width, frequency_sweep, hysteresis_sweep, HysteresisSweep, SweepTable};
pub use trace::SimTrace;
