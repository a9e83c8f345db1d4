//! Trajectory recovery from aggregated mobility data.
//!
//! The crate covers the whole loop: a synthetic population
//! ([`mobility`]), the per-slot tower counts a data owner would publish
//! ([`aggregation`]), an exact assignment solver ([`assignment`]), the
//! three-stage attack that re-links those counts into trajectories
//! ([`recovery`]), metrics for how much was recovered ([`evaluation`]), and a
//! harness for running whole experiments and factor sweeps
//! ([`experiment`]).

pub mod aggregation;
pub mod assignment;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod mobility;
pub mod recovery;

pub use error::{Error, Result};
