//! Deterministic discrete-event emulator of the continuum.
//!
//! Events are ordered by `(fire_at_ns, seq)`. All hot-path arithmetic is on
//! integers or exact rationals, so a given (spec, mapping, seed, repetition)
//! always yields the same event trace.

mod engine;
mod link;

pub use engine::{
    provision, provision_with, Counters, Deployment, EmulatorError, EventKind, Hop, Injection, InstanceRuntime,
    Message, ProvisionError, SimClock,
};
pub use link::{serialization_ns, Link, Transit};
