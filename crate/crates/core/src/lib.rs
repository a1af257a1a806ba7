//! Desk-scale reproduction of an accelerated wafer-scale neuromorphic workflow.
//!
//! The crate covers the whole chain a network goes through before it can be
//! emulated on a wafer-scale analog substrate:
//!
//! * [`network`] describes populations, projections and stimuli and samples
//!   probabilistic connectivity into explicit edge lists,
//! * [`models`] builds the balanced random network and the eight-population
//!   cortical microcircuit,
//! * [`adapt`] applies the hardware adaptation steps (downscaling, weight
//!   compensation, input substitution, conductance conversion, time-constant
//!   clamping, parameter variation),
//! * [`hardware`] and [`mapper`] model the wafer resources, place and route
//!   the network and account for lost synapses,
//! * [`sim`] runs the clock-driven LIF engine,
//! * [`analysis`] and [`bench`] turn spike records into rates, regimes,
//!   sweeps and throughput figures, and [`pipeline`] chains everything with
//!   a content-addressed mapping cache.

pub mod adapt;
pub mod analysis;
pub mod bench;
pub mod error;
pub mod hardware;
pub mod hash;
pub mod mapper;
pub mod models;
pub mod network;
pub mod pipeline;
pub mod psp;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
