use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use num_traits::{One, Signed};

use super::model::*;
use super::units::parse_duration_ns;
use crate::bench::behavior::BehaviorRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationCode {
    EmptyName,
    NoLayers,
    DuplicateLayer,
    DuplicateServiceId,
    UnknownBehavior,
    InvalidBehaviorParam,
    ZeroQuantity,
    NonPositiveCpuCapacity,
    UnknownLayer,
    LossOutOfRange,
    InvalidBandwidth,
    DuplicateNetworkRule,
    ZeroRepetitions,
    UnknownServiceRef,
    MissingPhaseArg,
    InvalidPhaseArg,
    WaitUntilNotIncreasing,
    DuplicateDimension,
    EmptyDomain,
    InvalidRange,
    UnknownParameterTarget,
    CapacityExceeded,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptyName => "EmptyName",
            ViolationCode::NoLayers => "NoLayers",
            ViolationCode::DuplicateLayer => "DuplicateLayer",
            ViolationCode::DuplicateServiceId => "DuplicateServiceId",
            ViolationCode::UnknownBehavior => "UnknownBehavior",
            ViolationCode::InvalidBehaviorParam => "InvalidBehaviorParam",
            ViolationCode::ZeroQuantity => "ZeroQuantity",
            ViolationCode::NonPositiveCpuCapacity => "NonPositiveCpuCapacity",
            ViolationCode::UnknownLayer => "UnknownLayer",
            ViolationCode::LossOutOfRange => "LossOutOfRange",
            ViolationCode::InvalidBandwidth => "InvalidBandwidth",
            ViolationCode::DuplicateNetworkRule => "DuplicateNetworkRule",
            ViolationCode::ZeroRepetitions => "ZeroRepetitions",
            ViolationCode::UnknownServiceRef => "UnknownServiceRef",
            ViolationCode::MissingPhaseArg => "MissingPhaseArg",
            ViolationCode::InvalidPhaseArg => "InvalidPhaseArg",
            ViolationCode::WaitUntilNotIncreasing => "WaitUntilNotIncreasing",
            ViolationCode::DuplicateDimension => "DuplicateDimension",
            ViolationCode::EmptyDomain => "EmptyDomain",
            ViolationCode::InvalidRange => "InvalidRange",
            ViolationCode::UnknownParameterTarget => "UnknownParameterTarget",
            ViolationCode::CapacityExceeded => "CapacityExceeded",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(code: ViolationCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code, self.path, self.message)
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Segment<'a> {
    Index(u64),
    Name(&'a str),
}

fn segments(path: &str) -> Vec<Segment<'_>> {
    path.split(['.', '[', ']'])
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<u64>() {
            Ok(i) => Segment::Index(i),
            Err(_) => Segment::Name(s),
        })
        .collect()
}

/// Path order with list indices compared numerically (`layers[2]` < `layers[10]`).
pub fn compare_paths(a: &str, b: &str) -> Ordering {
    segments(a).cmp(&segments(b))
}

pub fn sort_violations(violations: &mut [Violation]) {
    violations.sort_by(|a, b| {
        compare_paths(&a.path, &b.path)
            .then(a.code.cmp(&b.code))
            .then_with(|| a.message.cmp(&b.message))
    });
}

/// Checks every spec invariant against the built-in behavior registry.
pub fn validate_spec(spec: &ExperimentSpec) -> Vec<Violation> {
    validate_spec_with(spec, &BehaviorRegistry::builtin())
}

pub fn validate_spec_with(spec: &ExperimentSpec, registry: &BehaviorRegistry) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();

    if spec.name.trim().is_empty() {
        out.push(Violation::new(EmptyName, "name", "experiment name is empty"));
    }
    if spec.repetitions == 0 {
        out.push(Violation::new(
            ZeroRepetitions,
            "repetitions",
            "repetitions must be at least 1",
        ));
    }
    if spec.layers.is_empty() {
        out.push(Violation::new(NoLayers, "layers", "at least one layer is required"));
    }

    let mut layer_names = HashSet::new();
    let mut service_ids: HashMap<&str, String> = HashMap::new();
    for (li, layer) in spec.layers.iter().enumerate() {
        let lp = format!("layers[{li}]");
        if layer.name.trim().is_empty() {
            out.push(Violation::new(EmptyName, format!("{lp}.name"), "layer name is empty"));
        } else if !layer_names.insert(layer.name.as_str()) {
            out.push(Violation::new(
                DuplicateLayer,
                format!("{lp}.name"),
                format!("layer `{}` declared more than once", layer.name),
            ));
        }
        for (si, svc) in layer.services.iter().enumerate() {
            let sp = format!("{lp}.services[{si}]");
            if svc.id.trim().is_empty() {
                out.push(Violation::new(EmptyName, format!("{sp}.id"), "service id is empty"));
            } else if let Some(first) = service_ids.get(svc.id.as_str()) {
                out.push(Violation::new(
                    DuplicateServiceId,
                    format!("{sp}.id"),
                    format!("service id `{}` already declared at {first}", svc.id),
                ));
            } else {
                service_ids.insert(&svc.id, sp.clone());
            }
            if svc.quantity == 0 {
                out.push(Violation::new(
                    ZeroQuantity,
                    format!("{sp}.quantity"),
                    "quantity must be at least 1",
                ));
            }
            if !svc.cpu_capacity.is_positive() {
                out.push(Violation::new(
                    NonPositiveCpuCapacity,
                    format!("{sp}.cpu_capacity"),
                    "cpu_capacity must be positive",
                ));
            }
            match registry.build(&svc.kind, &svc.params) {
                Err(crate::bench::behavior::BuildError::UnknownKind(kind)) => out.push(Violation::new(
                    UnknownBehavior,
                    format!("{sp}.kind"),
                    format!("behavior `{kind}` is not registered"),
                )),
                Err(crate::bench::behavior::BuildError::Param(e)) => out.push(Violation::new(
                    InvalidBehaviorParam,
                    format!("{sp}.params.{}", e.key),
                    e.message,
                )),
                Ok(behavior) => {
                    if let Some(target) = behavior.target() {
                        if spec.service(target).is_none() {
                            out.push(Violation::new(
                                UnknownServiceRef,
                                format!("{sp}.params.target"),
                                format!("target service `{target}` is not declared"),
                            ));
                        }
                    }
                }
            }
        }
    }

    let mut pairs = HashSet::new();
    for (ri, rule) in spec.network_rules.iter().enumerate() {
        let rp = format!("network_rules[{ri}]");
        let mut known = true;
        for (field, layer) in [("src_layer", &rule.src_layer), ("dst_layer", &rule.dst_layer)] {
            if !layer_names.contains(layer.as_str()) {
                known = false;
                out.push(Violation::new(
                    UnknownLayer,
                    format!("{rp}.{field}"),
                    format!("layer `{layer}` is not declared"),
                ));
            }
        }
        if rule.loss_rate.is_negative() || rule.loss_rate > num_rational::Ratio::one() {
            out.push(Violation::new(
                LossOutOfRange,
                format!("{rp}.loss_rate"),
                format!("loss_rate {} is outside [0, 1]", rule.loss_rate),
            ));
        }
        if rule.bandwidth == Bandwidth::BitsPerSecond(0) {
            out.push(Violation::new(
                InvalidBandwidth,
                format!("{rp}.bandwidth_bps"),
                "bandwidth must be positive or unlimited",
            ));
        }
        if known {
            for pair in rule.directed_pairs() {
                if !pairs.insert(pair.clone()) {
                    out.push(Violation::new(
                        DuplicateNetworkRule,
                        rp.clone(),
                        format!("a rule for {} -> {} already exists", pair.0, pair.1),
                    ));
                }
            }
        }
    }

    let mut last_wait: Option<u64> = None;
    for (pi, phase) in spec.workflow.iter().enumerate() {
        let pp = format!("workflow[{pi}]");
        let arg_path = |key: &str| format!("{pp}.args.{key}");
        let check_duration = |key: &str, out: &mut Vec<Violation>| -> Option<u64> {
            let text = phase.args.get(key)?;
            match parse_duration_ns(text) {
                Ok(v) => Some(v),
                Err(e) => {
                    out.push(Violation::new(InvalidPhaseArg, arg_path(key), e));
                    None
                }
            }
        };
        let allowed: &[&str] = match phase.kind {
            PhaseKind::Launch => &[],
            PhaseKind::Inject => &["target", "count", "period", "size", "jitter"],
            PhaseKind::WaitUntil => &["sim_time"],
            PhaseKind::Gather => &["timeout"],
        };
        for key in phase.args.keys() {
            if !allowed.contains(&key.as_str()) {
                out.push(Violation::new(
                    InvalidPhaseArg,
                    arg_path(key),
                    format!("`{}` phases do not take argument `{key}`", phase.kind.as_str()),
                ));
            }
        }
        match phase.kind {
            PhaseKind::Launch => {}
            PhaseKind::Inject => {
                let target = phase.args.get("target");
                match target {
                    None => out.push(Violation::new(
                        MissingPhaseArg,
                        arg_path("target"),
                        "inject needs a target service",
                    )),
                    Some(t) if spec.service(t).is_none() => out.push(Violation::new(
                        UnknownServiceRef,
                        arg_path("target"),
                        format!("target service `{t}` is not declared"),
                    )),
                    Some(_) => {}
                }
                match phase.args.get("count") {
                    None => out.push(Violation::new(
                        MissingPhaseArg,
                        arg_path("count"),
                        "inject needs a record count",
                    )),
                    Some(c) if c.parse::<u64>().is_err() => out.push(Violation::new(
                        InvalidPhaseArg,
                        arg_path("count"),
                        format!("count `{c}` is not a non-negative integer"),
                    )),
                    Some(_) => {}
                }
                if let Some(size) = phase.args.get("size") {
                    if !size.parse::<u64>().is_ok_and(|v| v > 0) {
                        out.push(Violation::new(
                            InvalidPhaseArg,
                            arg_path("size"),
                            "size must be a positive bit count",
                        ));
                    }
                }
                check_duration("jitter", &mut out);
                let period = check_duration("period", &mut out);
                if period == Some(0) {
                    out.push(Violation::new(
                        InvalidPhaseArg,
                        arg_path("period"),
                        "period must be positive",
                    ));
                }
                // Without an explicit period or size the target must be a producer.
                if let Some(svc) = target.and_then(|t| spec.service(t)) {
                    let needs_defaults = !phase.args.contains_key("period") || !phase.args.contains_key("size");
                    if needs_defaults {
                        if let Ok(b) = registry.build(&svc.kind, &svc.params) {
                            if b.emission().is_none() {
                                out.push(Violation::new(
                                    MissingPhaseArg,
                                    arg_path(if phase.args.contains_key("period") {
                                        "size"
                                    } else {
                                        "period"
                                    }),
                                    format!(
                                        "service `{}` is not a producer; give period and size explicitly",
                                        svc.id
                                    ),
                                ));
                            }
                        }
                    }
                }
            }
            PhaseKind::WaitUntil => match phase.args.get("sim_time") {
                None => out.push(Violation::new(
                    MissingPhaseArg,
                    arg_path("sim_time"),
                    "wait_until needs sim_time",
                )),
                Some(_) => {
                    if let Some(t) = check_duration("sim_time", &mut out) {
                        if last_wait.is_some_and(|prev| t <= prev) {
                            out.push(Violation::new(
                                WaitUntilNotIncreasing,
                                arg_path("sim_time"),
                                format!("sim_time {t} ns does not exceed the previous wait_until"),
                            ));
                        }
                        last_wait = Some(last_wait.map_or(t, |prev| prev.max(t)));
                    }
                }
            },
            PhaseKind::Gather => {
                check_duration("timeout", &mut out);
            }
        }
    }

    let mut dims = BTreeSet::new();
    for (di, dim) in spec.parameters.dimensions.iter().enumerate() {
        let dp = format!("parameters[{di}]");
        if !dims.insert(dim.name.as_str()) {
            out.push(Violation::new(
                DuplicateDimension,
                format!("{dp}.name"),
                format!("dimension `{}` declared more than once", dim.name),
            ));
        }
        match &dim.domain {
            Domain::Discrete(values) if values.is_empty() => {
                out.push(Violation::new(
                    EmptyDomain,
                    format!("{dp}.domain"),
                    "value list is empty",
                ));
            }
            Domain::Discrete(_) => {}
            Domain::IntRange { lo, hi, step } => {
                if *step <= 0 || lo > hi {
                    out.push(Violation::new(
                        InvalidRange,
                        format!("{dp}.domain"),
                        format!("range [{lo}, {hi}] step {step} needs lo <= hi and step > 0"),
                    ));
                }
            }
            Domain::Continuous { lo, hi } => {
                if lo > hi {
                    out.push(Violation::new(
                        InvalidRange,
                        format!("{dp}.domain"),
                        "continuous range needs lo <= hi",
                    ));
                }
            }
        }
        if let Err(message) = check_parameter_target(spec, registry, &dim.name) {
            out.push(Violation::new(UnknownParameterTarget, format!("{dp}.name"), message));
        }
    }

    sort_violations(&mut out);
    out
}

/// Dimension names address `<service_id>.<param>`; `quantity` and
/// `cpu_capacity` override the service fields of the same name.
pub fn check_parameter_target(spec: &ExperimentSpec, registry: &BehaviorRegistry, name: &str) -> Result<(), String> {
    let Some((service, key)) = name.split_once('.') else {
        return Err(format!("dimension `{name}` must be named `<service>.<param>`"));
    };
    let Some(svc) = spec.service(service) else {
        return Err(format!("dimension `{name}` targets undeclared service `{service}`"));
    };
    if key == "quantity" || key == "cpu_capacity" {
        return Ok(());
    }
    match registry.params_of(&svc.kind) {
        Some(keys) if keys.contains(&key) => Ok(()),
        Some(_) => Err(format!("behavior `{}` has no parameter `{key}`", svc.kind)),
        // an unknown kind is reported on the service itself
        None => Ok(()),
    }
}
