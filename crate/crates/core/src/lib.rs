//! Simulation and Bayesian pulse-energy estimation for time-multiplexed
//! photon-number-resolving detectors built from fiber delay loops and two
//! gated InGaAs/InP APDs.
//!
//! The pipeline runs from the coupler tree ([`multiplexer`]) and the APD
//! click model ([`detector`]) through Monte Carlo ([`mc`]) or closed-form
//! ([`exact`]) click statistics into a response matrix ([`matrix`]). The
//! matrix is then inverted into posteriors over the mean photon number
//! ([`inference`]). [`baseline`] holds the single-pixel comparison estimator.

pub mod baseline;
pub mod cli;
pub mod config;
pub mod detector;
pub mod error;
pub mod exact;
pub mod inference;
pub mod matrix;
pub mod mc;
pub mod multiplexer;

pub use config::{RunConfig, SystemConfig};
pub use error::{Error, Result};
pub use exact::ClickDistribution;
pub use inference::{CredibleInterval, Estimator, Posterior};
pub use matrix::{Method, ResponseMatrix, Support};
pub use mc::{ClickRecord, PulseSource};
pub use multiplexer::{BinWeights, MultiplexerSpec};
