//! Statistical mmWave channel simulation.
//!
//! Independent drops or spatially consistent tracks of time-cluster /
//! spatial-lobe channels, with close-in path loss, correlated shadow fading,
//! outdoor-to-indoor loss, a Markov human-blockage model and directional
//! antenna patterns.

// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod antenna;
pub mod blockage;
pub mod config;
pub mod consistency;
pub mod error;
pub mod export;
pub mod geometry;
pub mod harness;
pub mod maps;
pub mod pathloss;
#[cfg(test)]
mod properties;
pub mod rng;
pub mod tcsl;
pub mod trajectory;

pub use config::{validate_config, SimConfig, ValidatedConfig};
pub use error::{Result, SimError};
pub use tcsl::{ChannelSnapshot, Mpc};
