//! Simulation and analysis toolkit for sequential partial measurements on
//! entangled qubit pairs: exact density-matrix evolution through weak
//! measurement kits, entanglement monotones, measurement strategies with
//! adaptive basis optimization, and finite-shot Monte Carlo emulation with
//! state tomography.

pub mod entanglement;
pub mod error;
pub mod measurement;
pub mod montecarlo;
pub mod qcore;
pub mod strategies;

pub use error::{Error, Result};
