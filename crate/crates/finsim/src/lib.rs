//! Reduced-order simulation of tendon-driven fin rays and the undulating-fin
//! robots built from them.
//!
//! Modules, bottom-up: [`model`] (configuration), [`actuator`] (one ray),
//! [`analysis`] (metrics), [`gait`] (drive signals), [`fin`] (coupled rays),
//! [`hydro`] (body forces and swimming), [`harness`] (calibration,
//! experiments, reports).

pub mod actuator;
pub mod analysis;
pub mod error;
pub mod fin;
pub mod gait;
pub mod harness;
pub mod hydro;
pub mod model;
pub mod optim;
pub mod table;
pub mod units;

pub use error::{Error, Result};
