//! Two-way amplify-and-forward UAV relay: link model, energy/delay
//! allocation, bit-error-rate analysis and Monte Carlo validation.

pub mod ber;
pub mod bessel;
pub mod channel;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod montecarlo;
pub mod optimizer;
pub mod oracle;

pub use error::{Error, Result};
