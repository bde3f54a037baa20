//! Reproducible edge-to-cloud experiment orchestration.
//!
//! A declarative [`spec::ExperimentSpec`] is mapped onto hosts
//! ([`mapping`]), executed on a deterministic discrete-event emulator
//! ([`emulator`]) while [`monitor`] samples metrics, and the results are
//! written to a content-hashed archive ([`archive`]). [`optimizer`] searches
//! parameter spaces over repeated runs.

pub mod archive;
pub mod bench;
pub mod emulator;
pub mod mapping;
pub mod monitor;
pub mod optimizer;
pub mod rational;
pub mod rng;
pub mod spec;

pub use rational::Rational;

/// Version string recorded in archive manifests.
pub const TOOL_VERSION: &str = concat!("continuum-lab/", env!("CARGO_PKG_VERSION"));
