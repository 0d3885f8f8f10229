//! Repetitive-control design toolkit and simulated pressure-controlled
//! ventilation testbench.
//!
//! The crate covers the full loop: a blower–hose–patient plant, closed-loop
//! FRF identification, rational fitting, learning/robustness filter synthesis
//! with a frequency-domain robust-stability test, a streaming PID + repetitive
//! controller, and an experiment harness that compares both controllers.

pub mod control;
pub mod error;
pub mod harness;
pub mod lti;
pub mod plant;
pub mod rc_design;
pub mod sysid;

pub use error::{Error, Result};
