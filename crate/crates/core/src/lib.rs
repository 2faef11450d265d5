//! Urban mmWave two-hop relay network simulator.
//!
//! The crate models a street-canyon city as a graph, synthesizes spatially
//! and temporally correlated log-normal channels along the minimum-distance
//! propagation paths, computes closed-form optimal amplify-and-forward
//! beamforming across relay clusters, and compares relay-selection policies
//! (ideal, randomized, and predictive sample-average-approximation selection
//! driven by Kalman and Gaussian-process channel predictors) over Monte
//! Carlo trials with common random numbers.
//!
//! All numeric code is generic over the scalar type via [`scalar::Scalar`];
//! the aliases at the crate root fix `f64`, which is what the CLI and the
//! shipped configs use.

pub mod beamforming;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod prediction;
pub mod scalar;
pub mod selection;
pub mod topology;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar type for simulations.
pub type DefaultScalar = f64;

/// `f64` street graph.
pub type Graph = topology::StreetGraph<f64>;
/// `f64` channel parameters.
pub type Params = channel::ChannelParams<f64>;
/// `f64` experiment, as built from a config file.
pub type Experiment = harness::Experiment<f64>;
/// `f64` aggregate statistics.
pub type Stats = harness::AggregateStats<f64>;
