//! Possibility labeled multi-Bernoulli tracking.

pub mod assignment;
pub mod error;
pub mod filter;
pub mod fusion;
pub mod labeled;
pub mod network;
pub mod possibility;
pub mod sim;

pub use error::{Error, Result};
