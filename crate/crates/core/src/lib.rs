//! Discrete-time model of sexual contact networks with steady and casual
//! partnerships, migration and concurrency, plus the simulation-based
//! inference machinery used to fit it to survey summaries.
//!
//! The crate is organised bottom-up:
//!
//! * [`sim`] evolves a [`sim::Network`] one week at a time.
//! * [`analytic`] holds closed-form large-population results and unit
//!   conversions; they double as oracles for the simulator.
//! * [`survey`] emulates cross-sectional and longitudinal survey instruments.
//! * [`priors`] defines the beta priors over the weekly probabilities.
//! * [`abc`] builds reference tables and runs rejection ABC with regression
//!   adjustment, posterior predictive replication and the lag study.
//! * [`cli`] is the orchestration layer behind the `contactnet` binary.

pub mod abc;
pub mod analytic;
pub mod cli;
pub mod config;
mod error;
pub mod io;
pub mod params;
pub mod priors;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod survey;

pub use error::{Error, Result};
pub use params::ModelParams;
