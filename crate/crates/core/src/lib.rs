//! Spatial stochastic simulation of two-type DNA lesion kinetics.
//!
//! Sub-lethal (`X`) and lethal (`Y`) lesions live as a point measure on a
//! bounded domain. They diffuse with reflection at the boundary, repair,
//! convert, interact pairwise through distance-dependent kernels and are
//! created by a compound-Poisson irradiation source. Deterministic solvers
//! (master equation, mean ODEs, large-population limit) serve as oracles.
//!
//! Module map:
//! - [`geometry`]: domains, reflection, uniform sampling
//! - [`state`]: the point measure and its functionals
//! - [`rates`]: reaction rates, kernels, placement laws
//! - [`diffusion`]: reflected Euler-Maruyama motion
//! - [`engine`]: the jump-diffusion simulator
//! - [`irradiation`]: microdosimetric damage sampling
//! - [`chemistry`]: reaction-diffusion fields with jump forcing
//! - [`meanfield`]: master equation, mean ODEs, Gillespie oracle, limit equations
//! - [`config`], [`output`], [`run`]: run orchestration and artifacts

pub mod chemistry;
pub mod config;
pub mod diffusion;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod irradiation;
pub mod meanfield;
pub mod output;
pub mod rates;
pub mod rng;
pub mod run;
pub mod state;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Domain, Point};
pub use state::{LesionType, SystemState};
