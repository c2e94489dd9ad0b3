//! Kinetic Monte Carlo simulation of a continuously loaded Bose gas in a
//! harmonic trap, with evaporation and condensate outcoupling, plus a
//! perturbative analysis of photon reabsorption in a reduced Λ system.

pub mod bre;
pub mod collision;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod observables;
pub mod occupancy;
pub mod pump;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
