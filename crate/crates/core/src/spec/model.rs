use std::collections::BTreeMap;
use std::fmt;

use crate::rational::{to_fraction_string, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentSpec {
    pub name: String,
    pub layers: Vec<Layer>,
    pub network_rules: Vec<NetworkRule>,
    pub workflow: Vec<WorkflowPhase>,
    pub parameters: ParameterSpace,
    pub repetitions: u32,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub name: String,
    pub services: Vec<ServiceDef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDef {
    pub id: String,
    pub kind: String,
    pub quantity: u32,
    /// Service units processed per second.
    pub cpu_capacity: Rational,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bandwidth {
    Unlimited,
    BitsPerSecond(u64),
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Unlimited => f.write_str("unlimited"),
            Bandwidth::BitsPerSecond(bps) => write!(f, "{bps}bps"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkRule {
    pub src_layer: String,
    pub dst_layer: String,
    pub delay_ns: u64,
    pub jitter_ns: u64,
    pub bandwidth: Bandwidth,
    pub loss_rate: Rational,
    pub symmetric: bool,
}

impl NetworkRule {
    /// A rule with no shaping at all.
    pub fn ideal(src: &str, dst: &str) -> Self {
        Self {
            src_layer: src.to_string(),
            dst_layer: dst.to_string(),
            delay_ns: 0,
            jitter_ns: 0,
            bandwidth: Bandwidth::Unlimited,
            loss_rate: Rational::from_integer(0),
            symmetric: false,
        }
    }

    /// Directed (src, dst) pairs this rule covers.
    pub fn directed_pairs(&self) -> Vec<(String, String)> {
        let forward = (self.src_layer.clone(), self.dst_layer.clone());
        if self.symmetric && self.src_layer != self.dst_layer {
            vec![forward, (self.dst_layer.clone(), self.src_layer.clone())]
        } else {
            vec![forward]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhaseKind {
    Launch,
    Inject,
    WaitUntil,
    Gather,
}

impl PhaseKind {
    pub const ALL: [PhaseKind; 4] = [
        PhaseKind::Launch,
        PhaseKind::Inject,
        PhaseKind::WaitUntil,
        PhaseKind::Gather,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseKind::Launch => "launch",
            PhaseKind::Inject => "inject",
            PhaseKind::WaitUntil => "wait_until",
            PhaseKind::Gather => "gather",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// One step of the workflow.
///
/// Arguments by kind:
/// * `inject`: `target` (service id), `count` (records per target instance),
///   optional `period` (duration, defaults to the producer's `period`),
///   `size` (bits, defaults to the producer's `record_bits`) and `jitter`
///   (duration, uniform extra delay per tick).
/// * `wait_until`: `sim_time` (absolute duration since the start of the run).
/// * `gather`: optional `timeout` (duration); drains outstanding work.
/// * `launch`: no arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowPhase {
    pub name: String,
    pub kind: PhaseKind,
    pub args: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ParamValue {
    Int(i64),
    /// Non-integral rational; integral values are always stored as `Int`.
    Rat(Rational),
    Text(String),
}

impl ParamValue {
    pub fn from_rational(value: Rational) -> Self {
        if value.is_integer() {
            if let Ok(i) = i64::try_from(value.to_integer()) {
                return ParamValue::Int(i);
            }
        }
        ParamValue::Rat(value)
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            ParamValue::Int(i) => Some(Rational::from_integer(i128::from(*i))),
            ParamValue::Rat(r) => Some(*r),
            ParamValue::Text(_) => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        !matches!(self, ParamValue::Text(_))
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Rat(r) => f.write_str(&to_fraction_string(r)),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Domain {
    Discrete(Vec<ParamValue>),
    IntRange { lo: i64, hi: i64, step: i64 },
    Continuous { lo: Rational, hi: Rational },
}

impl Domain {
    /// Number of points for finite domains.
    pub fn cardinality(&self) -> Option<u64> {
        match self {
            Domain::Discrete(values) => Some(values.len() as u64),
            Domain::IntRange { lo, hi, step } => {
                if *step <= 0 || hi < lo {
                    Some(0)
                } else {
                    Some(((i128::from(*hi) - i128::from(*lo)) / i128::from(*step)) as u64 + 1)
                }
            }
            Domain::Continuous { .. } => None,
        }
    }

    /// The `k`-th point of a finite domain, in declared order.
    pub fn value_at(&self, k: u64) -> Option<ParamValue> {
        match self {
            Domain::Discrete(values) => values.get(k as usize).cloned(),
            Domain::IntRange { lo, step, .. } => {
                if k < self.cardinality()? {
                    Some(ParamValue::Int(lo + step * k as i64))
                } else {
                    None
                }
            }
            Domain::Continuous { .. } => None,
        }
    }

    pub fn contains(&self, value: &ParamValue) -> bool {
        match self {
            Domain::Discrete(values) => values.contains(value),
            Domain::IntRange { lo, hi, step } => match value {
                ParamValue::Int(v) => v >= lo && v <= hi && (v - lo) % step == 0,
                _ => false,
            },
            Domain::Continuous { lo, hi } => match value.as_rational() {
                Some(v) => v >= *lo && v <= *hi,
                None => false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimension {
    pub name: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParameterSpace {
    pub dimensions: Vec<Dimension>,
}

impl ParameterSpace {
    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d.name == name)
    }
}

impl ExperimentSpec {
    pub fn services(&self) -> impl Iterator<Item = (&Layer, &ServiceDef)> {
        self.layers.iter().flat_map(|l| l.services.iter().map(move |s| (l, s)))
    }

    pub fn service(&self, id: &str) -> Option<&ServiceDef> {
        self.services().map(|(_, s)| s).find(|s| s.id == id)
    }

    pub fn service_mut(&mut self, id: &str) -> Option<&mut ServiceDef> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.services.iter_mut())
            .find(|s| s.id == id)
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }
}
