//! Assignment of service instances to hosts, layer by layer.
//!
//! Instances are enumerated in (layer order, service order, index order) and
//! named `<service_id>.<k>`. A layer's instances may only land on hosts of the
//! same layer.

use std::collections::HashSet;
use std::fmt;

use num_traits::Signed;
use serde_yaml::Value;

use crate::rational::{parse_rational, rational_from_f64_text, Rational};
use crate::spec::validate::{Violation, ViolationCode};
use crate::spec::{sha256_hex, ExperimentSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Host {
    pub id: String,
    pub layer: String,
    pub slot_capacity: u32,
    /// Physical capacity in service units per second; bounds the capacity of
    /// every instance placed here.
    pub cpu_capacity: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PoolError {
    #[error("host pool syntax error: {0}")]
    Syntax(String),
    #[error("host pool schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("duplicate host id `{0}`")]
    DuplicateHost(String),
    #[error("host `{0}` must have at least one slot")]
    ZeroSlots(String),
    #[error("host `{0}` must have a positive cpu_capacity")]
    NonPositiveCpu(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HostPool {
    hosts: Vec<Host>,
}

impl HostPool {
    pub fn new(hosts: Vec<Host>) -> Result<Self, PoolError> {
        let mut seen = HashSet::new();
        for h in &hosts {
            if !seen.insert(h.id.as_str()) {
                return Err(PoolError::DuplicateHost(h.id.clone()));
            }
            if h.slot_capacity == 0 {
                return Err(PoolError::ZeroSlots(h.id.clone()));
            }
            if h.cpu_capacity.is_some_and(|c| !c.is_positive()) {
                return Err(PoolError::NonPositiveCpu(h.id.clone()));
            }
        }
        Ok(Self { hosts })
    }

    pub fn hosts(&self) -> &[Host] {
        &self.hosts
    }

    /// Hosts of one layer, in declaration order.
    pub fn layer_hosts<'a>(&'a self, layer: &'a str) -> impl Iterator<Item = &'a Host> + 'a {
        self.hosts.iter().filter(move |h| h.layer == layer)
    }

    pub fn host(&self, id: &str) -> Option<&Host> {
        self.hosts.iter().find(|h| h.id == id)
    }

    pub fn slot_sum(&self, layer: &str) -> u64 {
        self.layer_hosts(layer).map(|h| u64::from(h.slot_capacity)).sum()
    }

    /// One host per layer with as many slots as the layer has instances.
    pub fn synthesize(spec: &ExperimentSpec) -> Self {
        let hosts = spec
            .layers
            .iter()
            .filter_map(|l| {
                let total: u64 = l.services.iter().map(|s| u64::from(s.quantity)).sum();
                (total > 0).then(|| Host {
                    id: format!("{}-host", l.name),
                    layer: l.name.clone(),
                    slot_capacity: u32::try_from(total).unwrap_or(u32::MAX),
                    cpu_capacity: None,
                })
            })
            .collect();
        Self { hosts }
    }

    /// Parses `hosts: [{id, layer, slots, cpu_capacity}]`.
    pub fn from_yaml(text: &str) -> Result<Self, PoolError> {
        let doc: Value = serde_yaml::from_str(text).map_err(|e| PoolError::Syntax(e.to_string()))?;
        let schema = |path: String, message: &str| PoolError::Schema {
            path,
            message: message.to_string(),
        };
        let top = doc
            .as_mapping()
            .ok_or_else(|| schema(String::new(), "expected a mapping"))?;
        if let Some(key) = top.keys().find(|k| k.as_str() != Some("hosts")) {
            return Err(schema(key.as_str().unwrap_or("?").to_string(), "unknown key"));
        }
        let list = top
            .get("hosts")
            .and_then(Value::as_sequence)
            .ok_or_else(|| schema("hosts".into(), "expected a list of hosts"))?;
        let mut hosts = Vec::new();
        for (i, item) in list.iter().enumerate() {
            let path = format!("hosts[{i}]");
            let m = item
                .as_mapping()
                .ok_or_else(|| schema(path.clone(), "expected a mapping"))?;
            for k in m.keys() {
                let k = k.as_str().unwrap_or_default();
                if !["id", "layer", "slots", "cpu_capacity"].contains(&k) {
                    return Err(schema(format!("{path}.{k}"), "unknown key"));
                }
            }
            let text = |key: &str| {
                m.get(key)
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| schema(format!("{path}.{key}"), "expected a string"))
            };
            let slots = match m.get("slots") {
                None => 1,
                Some(v) => v
                    .as_u64()
                    .and_then(|s| u32::try_from(s).ok())
                    .ok_or_else(|| schema(format!("{path}.slots"), "expected a non-negative integer"))?,
            };
            let cpu_capacity = match m.get("cpu_capacity") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => {
                    Some(parse_rational(s).map_err(|_| schema(format!("{path}.cpu_capacity"), "expected a number"))?)
                }
                Some(v) => Some(
                    v.as_i64()
                        .map(|i| Rational::from_integer(i128::from(i)))
                        .or_else(|| v.as_f64().and_then(rational_from_f64_text))
                        .ok_or_else(|| schema(format!("{path}.cpu_capacity"), "expected a number"))?,
                ),
            };
            hosts.push(Host {
                id: text("id")?,
                layer: text("layer")?,
                slot_capacity: slots,
                cpu_capacity,
            });
        }
        Self::new(hosts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Cycle through the layer's hosts, skipping full ones.
    #[default]
    RoundRobin,
    /// Fill each host to capacity before moving on.
    FirstFit,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round_robin" => Ok(Strategy::RoundRobin),
            "first_fit" => Ok(Strategy::FirstFit),
            other => Err(format!("unknown mapping strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub instance_id: String,
    pub service_id: String,
    pub layer: String,
    pub host_id: String,
    /// Capacity of the chosen host, when the pool declares one.
    pub host_cpu_capacity: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Mapping {
    pub assignments: Vec<Assignment>,
}

impl Mapping {
    /// `instance<TAB>host` lines; the bytes behind [`Mapping::digest`].
    pub fn to_tsv(&self) -> String {
        self.assignments
            .iter()
            .map(|a| format!("{}\t{}\n", a.instance_id, a.host_id))
            .collect()
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.to_tsv().as_bytes())
    }

    pub fn pairs(&self) -> Vec<(&str, &str)> {
        self.assignments
            .iter()
            .map(|a| (a.instance_id.as_str(), a.host_id.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MappingError {
    #[error("CapacityExceeded({0}): layer has more instances than host slots")]
    CapacityExceeded(String),
    #[error("MissingLayerHosts({0}): layer declares services but has no hosts")]
    MissingLayerHosts(String),
}

pub fn instance_id(service_id: &str, k: u32) -> String {
    format!("{service_id}.{k}")
}

pub fn resolve_mapping(spec: &ExperimentSpec, pool: &HostPool, strategy: Strategy) -> Result<Mapping, MappingError> {
    let mut assignments = Vec::new();
    for layer in &spec.layers {
        let instances: u64 = layer.services.iter().map(|s| u64::from(s.quantity)).sum();
        if instances == 0 {
            continue;
        }
        let hosts: Vec<&Host> = pool.layer_hosts(&layer.name).collect();
        if hosts.is_empty() {
            return Err(MappingError::MissingLayerHosts(layer.name.clone()));
        }
        if instances > pool.slot_sum(&layer.name) {
            return Err(MappingError::CapacityExceeded(layer.name.clone()));
        }
        let mut used = vec![0u32; hosts.len()];
        let mut cursor = 0usize;
        for svc in &layer.services {
            for k in 0..svc.quantity {
                // Capacity was checked above, so a free host always exists.
                while used[cursor] >= hosts[cursor].slot_capacity {
                    cursor = (cursor + 1) % hosts.len();
                }
                used[cursor] += 1;
                assignments.push(Assignment {
                    instance_id: instance_id(&svc.id, k),
                    service_id: svc.id.clone(),
                    layer: layer.name.clone(),
                    host_id: hosts[cursor].id.clone(),
                    host_cpu_capacity: hosts[cursor].cpu_capacity,
                });
                if strategy == Strategy::RoundRobin {
                    cursor = (cursor + 1) % hosts.len();
                }
            }
        }
    }
    Ok(Mapping { assignments })
}

pub fn check_capacity(spec: &ExperimentSpec, pool: &HostPool) -> Vec<Violation> {
    spec.layers
        .iter()
        .enumerate()
        .filter_map(|(i, layer)| {
            let instances: u64 = layer.services.iter().map(|s| u64::from(s.quantity)).sum();
            let slots = pool.slot_sum(&layer.name);
            (instances > slots).then(|| {
                Violation::new(
                    ViolationCode::CapacityExceeded,
                    format!("layers[{i}]"),
                    format!(
                        "layer `{}` has {instances} instances but only {slots} host slots",
                        layer.name
                    ),
                )
            })
        })
        .collect()
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.assignments {
            writeln!(f, "{} -> {}", a.instance_id, a.host_id)?;
        }
        Ok(())
    }
}
