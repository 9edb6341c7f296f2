//! Latent-space recommenders in Euclidean space and in the Poincaré ball.

pub mod data;
pub mod distortion;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod models;
pub mod optim;
pub mod spaces;
pub mod synth;

pub use error::{HyperError, Result};
