//! Spatially structured competition dynamics.
//!
//! A population lives on a bounded 1D habitat, diffuses, grows at a
//! position-dependent rate, and dies from nonlocal competition weighted by a
//! kernel. This crate computes, for one- and two-type populations:
//!
//! - principal eigenpairs of the growth-diffusion operator (the sign of the
//!   principal eigenvalue decides survival),
//! - steady states, in closed form for separable kernels and by fixed-point
//!   iteration for general kernels, with an a-priori sup bound,
//! - time-dependent solutions via IMEX finite differences,
//! - the long-time regime (extinction / fixation / coexistence / bistable)
//!   from the eigenvalues and interaction coefficients, plus a quantitative
//!   basin certificate for the resident-wins case,
//! - reduced mass equations that cross-validate the PDE runs,
//! - end-to-end experiments: reference-scenario reproduction, parameter
//!   sweeps, and classifier-vs-simulation agreement reports.
//!
//! The `nichesim` binary exposes all of it behind a config-file driven CLI;
//! see the repository README for the schema.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod operators;
pub mod output;
pub mod params;
pub mod scenario;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{inner_l2, integrate, norm_l2, Field, Grid};
pub use params::{CompetitionKernel, DimorphicParams, SpeciesParams};

/// Version string embedded in emitted summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
