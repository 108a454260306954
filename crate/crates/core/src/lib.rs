//! Consensus in directed networks driven by per-node minimum-energy filters.
//!
//! Every node estimates its own state and its neighbours' states from
//! disturbed measurements and feeds the estimates into a consensus law. The
//! crate simulates that closed loop next to classical consensus and provides
//! the spectral, equilibrium, input-to-state and coherence analyses used to
//! check it.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision instantiation.

// `!(x > 0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod disturbance;
pub mod error;
pub mod filter;
pub mod graph;
pub mod integrate;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Topology64 = graph::NetworkTopology<f64>;
pub type Laplacian64 = graph::LaplacianMatrix<f64>;
pub type FilterParams64 = filter::FilterParams<f64>;
pub type Scenario64 = simulate::Scenario<f64>;
pub type Trajectory64 = simulate::Trajectory<f64>;
pub type GlobalSystem64 = analysis::GlobalSystem<f64>;
pub type SpectralReport64 = analysis::SpectralReport<f64>;
pub type EquilibriumPrediction64 = analysis::EquilibriumPrediction<f64>;
pub type IssBound64 = analysis::IssBound<f64>;
pub type CoherenceReport64 = analysis::CoherenceReport<f64>;

pub type Topology32 = graph::NetworkTopology<f32>;
pub type Scenario32 = simulate::Scenario<f32>;
