//! Causal analysis of discrete finite systems.
//!
//! Effective information of transition probability matrices, macroscale model
//! choices (coarse-graining, exogenous states, freezing and black-boxing of
//! elements), search over model space for the maximally informative model, and
//! comparison of the resulting causal capacity with the Shannon channel
//! capacity of the same matrix.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the common `f64` instantiation.

pub mod capacity;
pub mod error;
pub mod fixtures;
pub mod gates;
pub mod io;
pub mod measures;
pub mod model;
pub mod real;
pub mod search;
pub mod tpm;

pub use error::{Error, Result};
pub use real::Real;

pub type Tpm = tpm::TransitionMatrix<f64>;
pub type Tpm32 = tpm::TransitionMatrix<f32>;
pub type Dist = tpm::Distribution<f64>;
pub type Dist32 = tpm::Distribution<f32>;
pub type Report = measures::CausalReport<f64>;
pub type Network = gates::GateNetwork<f64>;
pub type Capacity = capacity::CapacityResult<f64>;

pub use capacity::{CodingResult, EmergenceGap};
pub use gates::ElementChoice;
pub use model::{ModelChoice, Partition};
pub use search::{Choice, LadderLevel, SearchResult};
