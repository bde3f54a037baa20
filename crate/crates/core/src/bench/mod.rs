//! Built-in behaviors and the edge-to-cloud pipeline presets.

pub mod behavior;
pub mod scenario;

pub use behavior::{Behavior, BehaviorRegistry, BuildError, Completion, Emission, ParamError};
pub use scenario::{analytic_latency, build_preset, build_scenario, Preset, ScenarioError, ScenarioParams};
