//! Two-stage indoor scene synthesis on top-down semantic maps.
//!
//! A categorical (multinomial) diffusion model generates a semantic map of a
//! room, optionally conditioned on a floor or architecture mask and a room
//! type. Connected components of the map become object instances, an
//! attribute predictor fills in height, elevation and orientation, and the
//! assembly stage retrieves catalog assets and builds the room mesh. The
//! [`metrics`] module scores the result.

pub mod error;
pub mod layout;

pub use error::{Error, Result};

pub mod apm;
pub mod cli;
pub mod assembly;
pub mod diffusion;
pub mod extraction;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod synth;
