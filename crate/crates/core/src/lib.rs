//! Open-system truncated Wigner simulator for multimode Raman-cavity
//! hybrids.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: momentum grid, band dispersions, couplings and baths;
//! * [`dynamics`]: drift of the Heisenberg-Langevin equations, bath noise
//!   and the stochastic Heun step;
//! * [`ensemble`]: Wigner sampling and deterministic trajectory ensembles;
//! * [`stats`]: mergeable moment accumulators with block error bars;
//! * [`observables`]: variance modifications, squeezing and Raman shift;
//! * [`sweep`]: band-gap sweeps over the reference scenarios.
//!
//! Trajectories run on rayon when the default `parallel` feature is on.

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod observables;
pub mod parallel;
pub mod rng;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
