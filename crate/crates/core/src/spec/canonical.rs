//! Canonical serialization: compact JSON with lexicographically sorted keys,
//! integers in plain decimal, rationals as reduced `"p/q"` strings and lists
//! in declared order. The master seed is recorded separately in archive
//! manifests and is not part of the canonical form.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::model::*;
use crate::rational::to_fraction_string;

fn string_map(map: &std::collections::BTreeMap<String, String>) -> Value {
    Value::Object(
        map.iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect::<Map<_, _>>(),
    )
}

fn param_value(v: &ParamValue) -> Value {
    match v {
        ParamValue::Int(i) => json!(i),
        ParamValue::Rat(r) => json!(to_fraction_string(r)),
        ParamValue::Text(t) => json!(t),
    }
}

pub fn canonical_value(spec: &ExperimentSpec) -> Value {
    let layers: Vec<Value> = spec
        .layers
        .iter()
        .map(|l| {
            let services: Vec<Value> = l
                .services
                .iter()
                .map(|s| {
                    json!({
                        "id": s.id,
                        "kind": s.kind,
                        "quantity": s.quantity,
                        "cpu_capacity": to_fraction_string(&s.cpu_capacity),
                        "params": string_map(&s.params),
                    })
                })
                .collect();
            json!({ "name": l.name, "services": services })
        })
        .collect();
    let rules: Vec<Value> = spec
        .network_rules
        .iter()
        .map(|r| {
            let bandwidth = match r.bandwidth {
                Bandwidth::Unlimited => json!("unlimited"),
                Bandwidth::BitsPerSecond(b) => json!(b),
            };
            json!({
                "src_layer": r.src_layer,
                "dst_layer": r.dst_layer,
                "delay_ns": r.delay_ns,
                "jitter_ns": r.jitter_ns,
                "bandwidth_bps": bandwidth,
                "loss_rate": to_fraction_string(&r.loss_rate),
                "symmetric": r.symmetric,
            })
        })
        .collect();
    let workflow: Vec<Value> = spec
        .workflow
        .iter()
        .map(|p| json!({ "name": p.name, "kind": p.kind.as_str(), "args": string_map(&p.args) }))
        .collect();
    let parameters: Vec<Value> = spec
        .parameters
        .dimensions
        .iter()
        .map(|d| {
            let domain = match &d.domain {
                Domain::Discrete(values) => {
                    json!({ "discrete": values.iter().map(param_value).collect::<Vec<_>>() })
                }
                Domain::IntRange { lo, hi, step } => json!({ "range": [lo, hi], "step": step }),
                Domain::Continuous { lo, hi } => {
                    json!({ "continuous": [to_fraction_string(lo), to_fraction_string(hi)] })
                }
            };
            json!({ "name": d.name, "domain": domain })
        })
        .collect();
    json!({
        "name": spec.name,
        "layers": layers,
        "network_rules": rules,
        "workflow": workflow,
        "parameters": parameters,
        "repetitions": spec.repetitions,
    })
}

/// The canonical text whose SHA-256 is the spec digest.
pub fn canonical_string(spec: &ExperimentSpec) -> String {
    // serde_json maps are BTreeMaps, so keys serialize sorted.
    serde_json::to_string(&canonical_value(spec)).expect("json values always serialize")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the canonical serialization, as 64 lowercase hex characters.
pub fn canonical_digest(spec: &ExperimentSpec) -> String {
    sha256_hex(canonical_string(spec).as_bytes())
}
