//! Joint communication and sensing coverage of RIS-assisted mmWave networks
//! under random blockage.
//!
//! Two independent engines are provided: a Monte Carlo simulator of network
//! drops ([`sinr`]) and a numerical evaluation of the stochastic-geometry
//! expressions ([`coverage`], [`distributions`]). They share parameters,
//! gain models and association rules, so each can validate the other.

pub mod association;
pub mod channel;
pub mod coverage;
pub mod distributions;
pub mod error;
pub mod geometry;
pub mod params;
pub mod quadrature;
pub mod sinr;
pub mod stats;
pub mod units;

pub use error::{Error, Result};
pub use params::ScenarioParams;
