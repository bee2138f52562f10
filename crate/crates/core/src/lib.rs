//! Variational sparse Bayesian channel estimation for IRS-aided mmWave
//! massive MIMO with semi-passive (sensor-equipped) reflecting elements.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod harness;
pub mod linalg;
pub mod measurement;
pub mod reference;
pub mod selftest;
pub mod trial;

pub use error::{Error, Result};
