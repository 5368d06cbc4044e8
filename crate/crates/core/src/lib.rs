//! Simulation and analysis workbench for AC-driven series-elastic
//! electrohydraulic actuators.
//!
//! The crate is organised bottom-up:
//!
//! * [`circuit`] – electrode leakage model (DC decay, AC square-wave envelope).
//! * [`actuator`] – quasi-static hydraulic displacement of a cell stack.
//! * [`plant`] – series-elastic mechanism with hysteresis, disturbances, and sensor noise.
//! * [`control`] – PI magnitude controller and square-wave modulator.
//! * [`sysid`] – fitting of leakage constants from decay records.
//! * [`harness`] – scenario configs, closed-loop runs, sweeps, metrics, and trace I/O.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuator;
pub mod circuit;
pub mod control;
pub mod error;
pub mod harness;
pub mod plant;
pub mod sysid;

pub use error::{Error, Result};
