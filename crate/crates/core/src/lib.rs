//! Brenier transport maps from the standard Gaussian onto log-concave targets.
//!
//! The crate is organised bottom-up:
//!
//! - [`potential`]: target measures `e^{-V} dx` as evaluator bundles with
//!   declared Hessian-band and concentration metadata.
//! - [`sampling`]: reproducible samplers (direct Gaussian, inverse CDF, MALA).
//! - [`exact`]: exact maps in dimension one and for radial targets, used as
//!   oracles by everything else.
//! - [`numeric`]: semi-discrete and entropic approximations for general
//!   targets.
//! - [`verify`]: growth, regularity and concentration checks that turn the
//!   bounds into pass/fail [`verify::BoundReport`]s.
//!
//! Everything here is `no_std` + `alloc`; file formats, the CLI and the
//! experiment runner live in the `brenier-lab` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cdf1d;
pub mod error;
pub mod exact;
pub mod linalg;
pub mod map;
pub mod numeric;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use exact::{brenier_1d, brenier_1d_with_accuracy, brenier_radial, monge_ampere_residual, Brenier1d, RadialMap, RadialProfile};
pub use map::{LinearMap, Provenance, RadialPowerMap, TransportMap};
pub use numeric::{entropic_map, semidiscrete_solve, EntropicMap, SemiDiscretePlan};
pub use potential::{Family, Metadata, Potential};
pub use sampling::{SampleBatch, SampleProvenance};
