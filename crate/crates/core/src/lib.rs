//! Multi-agent actor-critic training for a planar in-hand rotation task.
//!
//! A rigid object rests between the fingers of a simulated planar hand; each
//! finger plus the wrist is controlled by its own agent. Agents learn with
//! shared replay and a dense shaped reward built from a discounted
//! state-action occupancy estimate, and periodically average their hidden
//! network layers over a ring communication graph.
//!
//! Everything numeric is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases at the crate root pin the default `f64` instantiation.

pub mod agents;
pub mod angle;
pub mod checkpoint;
pub mod consensus;
pub mod env;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod net;
pub mod occupancy;
pub mod reward;
pub mod scalar;
pub mod stability;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default-precision environment.
pub type PlanarHandEnv = env::PlanarHandEnv<f64>;
/// Default-precision feed-forward network.
pub type Network = net::Network<f64>;
/// Default-precision occupancy estimator.
pub type OccupancyTable = occupancy::OccupancyTable<f64>;
/// Default-precision mixing matrix.
pub type MixingMatrix = consensus::MixingMatrix<f64>;
/// Default-precision run configuration.
pub type RunConfig = harness::config::RunConfig<f64>;
/// Default-precision checkpoint bundle.
pub type CheckpointBundle = checkpoint::CheckpointBundle<f64>;
