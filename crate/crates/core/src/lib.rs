//! Stationary sequences and random fields with prescribed marginals and
//! covariance, driven by latent correlated binary sequences.

mod conv;
pub mod covariance;
pub mod error;
pub mod gbp;
pub mod marginal;
pub mod field;
pub mod presets;
pub mod process;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
