//! Frequency-domain system identification with barycentric interpolants.

pub mod barycentric;
pub mod error;
pub mod eval;
pub mod lti;
pub mod plant;
pub mod sdp;
pub mod strategy;
pub mod weights;

mod serde_float;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
