//! Mean-field simulator for a ring of attractively coupled particles whose
//! collective density acts as a meter for one triggered particle.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod init;
pub mod integrator;
pub mod measurement;
pub mod model;
pub mod propagator;

pub use config::Config;
pub use error::{Error, Result};
pub use grid::{Grid, WaveField};
pub use model::{ModelParams, SystemState};
