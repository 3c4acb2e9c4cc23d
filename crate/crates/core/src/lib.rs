//! Simulation of polarization and spatial N00N-state experiments: Fock-space
//! algebra, linear optical elements, click-detector models, fiber-coupled
//! spatial fringes, scan records and fringe analysis.

pub mod analysis;
pub mod config;
pub mod detection;
pub mod elements;
pub mod error;
pub mod fock;
pub mod record;
pub mod scenario;
pub mod spatial;
pub mod transform;

pub use error::{Error, Result};
pub use fock::{FockState, ModeId, ModeSet, Polarization};
