//! Influence-network inference from multivariate count series.
//!
//! The crate models event counts with a discrete-time multivariate Hawkes
//! process and estimates its parameters online with an ensemble
//! Poisson-Gamma filter. The excitation matrix is read as a weighted,
//! directed influence network, and the ensemble spread as its uncertainty.

pub mod abm;
pub mod config;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod hawkes;
pub mod ingest;
pub mod io;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
