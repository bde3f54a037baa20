//! Edge-to-cloud pipeline presets with closed-form latency oracles.
//!
//! * `cloud_centric`: an edge producer ships raw records over the edge→cloud
//!   link to a cloud sink.
//! * `hybrid`: the producer hands records to an edge transformer over the
//!   (unshaped) intra-edge path; the transformer spends `preprocess_units`
//!   and forwards `factor * record_bits` over the same edge→cloud link.
//! * `quadratic`: a single-record benchmark whose latency in nanoseconds is
//!   `(a - 3)^2 + (b - 4)^2` over a 20x20 integer grid, for parameter search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::rational::{ceil_nanos, ceil_nonneg, to_fraction_string, Rational, NANOS_PER_SEC};
use crate::spec::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    CloudCentric,
    Hybrid,
    Quadratic,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::CloudCentric => "cloud_centric",
            Preset::Hybrid => "hybrid",
            Preset::Quadratic => "quadratic",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("UnknownPreset({0})")]
    UnknownPreset(String),
    #[error("invalid scenario parameter: {0}")]
    InvalidParameter(String),
}

impl FromStr for Preset {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cloud_centric" => Ok(Preset::CloudCentric),
            "hybrid" => Ok(Preset::Hybrid),
            "quadratic" => Ok(Preset::Quadratic),
            other => Err(ScenarioError::UnknownPreset(other.to_string())),
        }
    }
}

/// Knobs of the pipeline presets. Work is in service units, capacities in
/// units per second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioParams {
    pub n_records: u64,
    pub record_bits: u64,
    pub bandwidth_bps: u64,
    pub delay_ns: u64,
    pub factor: Rational,
    pub preprocess_units: Rational,
    pub edge_cpu: Rational,
    pub cloud_service_units: Rational,
    pub cloud_cpu: Rational,
    pub period_ns: u64,
    pub seed: u64,
}

impl Default for ScenarioParams {
    /// 10^6-bit records over 1 Mbps with 50 ms delay, a 10x edge reduction
    /// costing 20 ms, 100 records every 5 s.
    fn default() -> Self {
        Self {
            n_records: 100,
            record_bits: 1_000_000,
            bandwidth_bps: 1_000_000,
            delay_ns: 50_000_000,
            factor: Rational::new(1, 10),
            preprocess_units: Rational::from_integer(20),
            edge_cpu: Rational::from_integer(1_000),
            cloud_service_units: Rational::zero(),
            cloud_cpu: Rational::from_integer(1_000),
            period_ns: 5 * NANOS_PER_SEC,
            seed: 0,
        }
    }
}

fn params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn service(id: &str, kind: &str, cpu: Rational, p: BTreeMap<String, String>) -> ServiceDef {
    ServiceDef {
        id: id.to_string(),
        kind: kind.to_string(),
        quantity: 1,
        cpu_capacity: cpu,
        params: p,
    }
}

fn phase(name: &str, kind: PhaseKind, args: &[(&str, String)]) -> WorkflowPhase {
    WorkflowPhase {
        name: name.to_string(),
        kind,
        args: params(args),
    }
}

pub fn build_scenario(preset: &str, p: &ScenarioParams) -> Result<ExperimentSpec, ScenarioError> {
    build_preset(preset.parse()?, p)
}

pub fn build_preset(preset: Preset, p: &ScenarioParams) -> Result<ExperimentSpec, ScenarioError> {
    if preset == Preset::Quadratic {
        return Ok(quadratic_spec(p.seed));
    }
    if p.record_bits == 0 || p.bandwidth_bps == 0 || p.period_ns == 0 || p.n_records == 0 {
        return Err(ScenarioError::InvalidParameter(
            "records, record size, bandwidth and period must be positive".into(),
        ));
    }
    if p.factor <= Rational::zero() || p.factor > Rational::one() {
        return Err(ScenarioError::InvalidParameter("factor must lie in (0, 1]".into()));
    }
    if p.edge_cpu <= Rational::zero() || p.cloud_cpu <= Rational::zero() {
        return Err(ScenarioError::InvalidParameter(
            "cpu capacities must be positive".into(),
        ));
    }
    let frac = |r: &Rational| to_fraction_string(r);
    let first_hop = if preset == Preset::Hybrid {
        "preprocess"
    } else {
        "analytics"
    };
    let mut edge = vec![service(
        "camera",
        "producer",
        p.edge_cpu,
        params(&[
            ("record_bits", p.record_bits.to_string()),
            ("period", format!("{}ns", p.period_ns)),
            ("target", first_hop.to_string()),
        ]),
    )];
    if preset == Preset::Hybrid {
        edge.push(service(
            "preprocess",
            "transformer",
            p.edge_cpu,
            params(&[
                ("base_units", frac(&p.preprocess_units)),
                ("factor", frac(&p.factor)),
                ("target", "analytics".to_string()),
            ]),
        ));
    }
    let cloud = vec![service(
        "analytics",
        "sink",
        p.cloud_cpu,
        params(&[("base_units", frac(&p.cloud_service_units))]),
    )];
    Ok(ExperimentSpec {
        name: preset.as_str().to_string(),
        layers: vec![
            Layer {
                name: "edge".into(),
                services: edge,
            },
            Layer {
                name: "cloud".into(),
                services: cloud,
            },
        ],
        network_rules: vec![NetworkRule {
            src_layer: "edge".into(),
            dst_layer: "cloud".into(),
            delay_ns: p.delay_ns,
            jitter_ns: 0,
            bandwidth: Bandwidth::BitsPerSecond(p.bandwidth_bps),
            loss_rate: Rational::zero(),
            symmetric: true,
        }],
        workflow: vec![
            phase("deploy", PhaseKind::Launch, &[]),
            phase(
                "stream",
                PhaseKind::Inject,
                &[("target", "camera".into()), ("count", p.n_records.to_string())],
            ),
            phase("collect", PhaseKind::Gather, &[]),
        ],
        parameters: ParameterSpace::default(),
        repetitions: 1,
        master_seed: p.seed,
    })
}

/// Grid side and optimum of the quadratic benchmark.
pub const QUADRATIC_SIDE: i64 = 20;
pub const QUADRATIC_OPTIMUM: (i64, i64) = (3, 4);

pub fn quadratic_value(a: i64, b: i64) -> i64 {
    (a - QUADRATIC_OPTIMUM.0).pow(2) + (b - QUADRATIC_OPTIMUM.1).pow(2)
}

fn quadratic_spec(seed: u64) -> ExperimentSpec {
    let range = Domain::IntRange {
        lo: 0,
        hi: QUADRATIC_SIDE - 1,
        step: 1,
    };
    ExperimentSpec {
        name: "quadratic".into(),
        layers: vec![Layer {
            name: "edge".into(),
            services: vec![
                service(
                    "source",
                    "producer",
                    Rational::one(),
                    params(&[("record_bits", "1".into()), ("target", "bowl".into())]),
                ),
                service(
                    "bowl",
                    "quadratic_sink",
                    Rational::from_integer(i128::from(NANOS_PER_SEC)),
                    params(&[
                        ("a", "0".into()),
                        ("b", "0".into()),
                        ("center_a", QUADRATIC_OPTIMUM.0.to_string()),
                        ("center_b", QUADRATIC_OPTIMUM.1.to_string()),
                    ]),
                ),
            ],
        }],
        network_rules: Vec::new(),
        workflow: vec![
            phase(
                "probe",
                PhaseKind::Inject,
                &[("target", "source".into()), ("count", "1".into())],
            ),
            phase("collect", PhaseKind::Gather, &[]),
        ],
        parameters: ParameterSpace {
            dimensions: vec![
                Dimension {
                    name: "bowl.a".into(),
                    domain: range.clone(),
                },
                Dimension {
                    name: "bowl.b".into(),
                    domain: range,
                },
            ],
        },
        repetitions: 1,
        master_seed: seed,
    }
}

/// Closed-form end-to-end latency of one record travelling alone through a
/// preset (queues empty):
///
/// * cloud_centric: `ceil(S*1e9/bw) + delay + ceil(cloud_units*1e9/cloud_cpu)`
/// * hybrid: `ceil(pre*1e9/edge_cpu) + ceil(f*S*1e9/bw) + delay + ceil(cloud_units*1e9/cloud_cpu)`
///
/// The emulator sends `ceil(f*S)` bits, so the two agree whenever `f*S` is
/// a whole number of bits.
pub fn analytic_latency(preset: Preset, p: &ScenarioParams) -> u64 {
    let bw = Rational::from_integer(i128::from(p.bandwidth_bps));
    let bits = Rational::from_integer(i128::from(p.record_bits));
    let cloud = ceil_nanos(&p.cloud_service_units, &p.cloud_cpu);
    match preset {
        Preset::CloudCentric => ceil_nanos(&bits, &bw) + p.delay_ns + cloud,
        Preset::Hybrid => {
            ceil_nanos(&p.preprocess_units, &p.edge_cpu)
                + ceil_nonneg(&(p.factor * bits * Rational::from_integer(i128::from(NANOS_PER_SEC)) / bw))
                + p.delay_ns
                + cloud
        }
        Preset::Quadratic => 0,
    }
}
