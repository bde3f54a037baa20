//! YAML experiment documents to and from [`ExperimentSpec`].

use std::collections::BTreeMap;

use serde_yaml::{Mapping, Value};

use super::model::*;
use super::units::{parse_bandwidth, parse_duration_ns};
use crate::rational::{parse_rational, rational_from_f64_text, to_fraction_string, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("SyntaxError: {0}")]
    Syntax(String),
    #[error("SchemaError {path}: {message}")]
    Schema { path: String, message: String },
}

fn schema(path: &str, message: impl Into<String>) -> SpecError {
    SpecError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn index(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

/// A mapping whose keys have been checked against an allow-list.
struct Fields<'a> {
    path: String,
    map: &'a Mapping,
}

impl<'a> Fields<'a> {
    fn new(value: &'a Value, path: &str, allowed: &[&str]) -> Result<Self, SpecError> {
        let map = value.as_mapping().ok_or_else(|| schema(path, "expected a mapping"))?;
        for key in map.keys() {
            let key = key
                .as_str()
                .ok_or_else(|| schema(path, "mapping keys must be strings"))?;
            if !allowed.contains(&key) {
                return Err(schema(&join(path, key), format!("unknown key `{key}`")));
            }
        }
        Ok(Self {
            path: path.to_string(),
            map,
        })
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn at(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn required(&self, key: &str) -> Result<&'a Value, SpecError> {
        self.get(key)
            .ok_or_else(|| schema(&self.at(key), format!("missing required key `{key}`")))
    }
}

fn as_string(value: &Value, path: &str) -> Result<String, SpecError> {
    value
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| schema(path, "expected a string"))
}

/// Scalars rendered as text: strings verbatim, numbers in shortest decimal form.
fn scalar_text(value: &Value, path: &str) -> Result<String, SpecError> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(i.to_string())
            } else if let Some(u) = n.as_u64() {
                Ok(u.to_string())
            } else {
                Ok(format!("{}", n.as_f64().unwrap_or(f64::NAN)))
            }
        }
        _ => Err(schema(path, "expected a scalar")),
    }
}

fn as_u64(value: &Value, path: &str) -> Result<u64, SpecError> {
    value
        .as_u64()
        .ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn as_i64(value: &Value, path: &str) -> Result<i64, SpecError> {
    value.as_i64().ok_or_else(|| schema(path, "expected an integer"))
}

fn as_u32(value: &Value, path: &str) -> Result<u32, SpecError> {
    u32::try_from(as_u64(value, path)?).map_err(|_| schema(path, "integer out of range"))
}

fn as_bool(value: &Value, path: &str) -> Result<bool, SpecError> {
    value.as_bool().ok_or_else(|| schema(path, "expected a boolean"))
}

fn as_rational(value: &Value, path: &str) -> Result<Rational, SpecError> {
    match value {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Rational::from_integer(i128::from(i)))
            } else if let Some(u) = n.as_u64() {
                Ok(Rational::from_integer(i128::from(u)))
            } else {
                n.as_f64()
                    .and_then(rational_from_f64_text)
                    .ok_or_else(|| schema(path, "number not representable"))
            }
        }
        Value::String(s) => parse_rational(s).map_err(|e| schema(path, e.to_string())),
        _ => Err(schema(path, "expected a number or `p/q` fraction")),
    }
}

fn as_duration(value: &Value, path: &str) -> Result<u64, SpecError> {
    match value {
        Value::Number(_) => {
            if value.as_i64().is_some_and(|v| v < 0) {
                return Err(schema(path, "duration must not be negative"));
            }
            as_u64(value, path)
        }
        Value::String(s) => parse_duration_ns(s).map_err(|e| schema(path, e)),
        _ => Err(schema(path, "expected a duration")),
    }
}

fn as_list<'a>(value: &'a Value, path: &str) -> Result<&'a Vec<Value>, SpecError> {
    value.as_sequence().ok_or_else(|| schema(path, "expected a list"))
}

fn string_map(value: &Value, path: &str) -> Result<BTreeMap<String, String>, SpecError> {
    let map = value.as_mapping().ok_or_else(|| schema(path, "expected a mapping"))?;
    let mut out = BTreeMap::new();
    for (k, v) in map {
        let key = k.as_str().ok_or_else(|| schema(path, "mapping keys must be strings"))?;
        out.insert(key.to_string(), scalar_text(v, &join(path, key))?);
    }
    Ok(out)
}

/// Parses an experiment document.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, SpecError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| SpecError::Syntax(e.to_string()))?;
    spec_from_value(&doc)
}

pub fn spec_from_value(doc: &Value) -> Result<ExperimentSpec, SpecError> {
    let top = Fields::new(
        doc,
        "",
        &[
            "name",
            "seed",
            "repetitions",
            "layers",
            "network",
            "workflow",
            "parameters",
        ],
    )?;
    let name = as_string(top.required("name")?, "name")?;
    let master_seed = top.get("seed").map(|v| as_u64(v, "seed")).transpose()?.unwrap_or(0);
    let repetitions = top
        .get("repetitions")
        .map(|v| as_u32(v, "repetitions"))
        .transpose()?
        .unwrap_or(1);

    let mut layers = Vec::new();
    for (i, item) in as_list(top.required("layers")?, "layers")?.iter().enumerate() {
        layers.push(parse_layer(item, &index("layers", i))?);
    }

    let mut network_rules = Vec::new();
    if let Some(list) = top.get("network") {
        for (i, item) in as_list(list, "network")?.iter().enumerate() {
            network_rules.push(parse_rule(item, &index("network", i))?);
        }
    }

    let mut workflow = Vec::new();
    if let Some(list) = top.get("workflow") {
        for (i, item) in as_list(list, "workflow")?.iter().enumerate() {
            workflow.push(parse_phase(item, &index("workflow", i))?);
        }
    }

    let parameters = match top.get("parameters") {
        Some(v) => parse_parameters(v, "parameters")?,
        None => ParameterSpace::default(),
    };

    Ok(ExperimentSpec {
        name,
        layers,
        network_rules,
        workflow,
        parameters,
        repetitions,
        master_seed,
    })
}

fn parse_layer(value: &Value, path: &str) -> Result<Layer, SpecError> {
    let f = Fields::new(value, path, &["name", "services"])?;
    let name = as_string(f.required("name")?, &f.at("name"))?;
    let mut services = Vec::new();
    if let Some(list) = f.get("services") {
        let at = f.at("services");
        for (i, item) in as_list(list, &at)?.iter().enumerate() {
            services.push(parse_service(item, &index(&at, i))?);
        }
    }
    Ok(Layer { name, services })
}

fn parse_service(value: &Value, path: &str) -> Result<ServiceDef, SpecError> {
    let f = Fields::new(value, path, &["id", "kind", "quantity", "cpu_capacity", "params"])?;
    Ok(ServiceDef {
        id: as_string(f.required("id")?, &f.at("id"))?,
        kind: as_string(f.required("kind")?, &f.at("kind"))?,
        quantity: f
            .get("quantity")
            .map(|v| as_u32(v, &f.at("quantity")))
            .transpose()?
            .unwrap_or(1),
        cpu_capacity: f
            .get("cpu_capacity")
            .map(|v| as_rational(v, &f.at("cpu_capacity")))
            .transpose()?
            .unwrap_or_else(|| Rational::from_integer(1)),
        params: f
            .get("params")
            .map(|v| string_map(v, &f.at("params")))
            .transpose()?
            .unwrap_or_default(),
    })
}

fn parse_rule(value: &Value, path: &str) -> Result<NetworkRule, SpecError> {
    let f = Fields::new(
        value,
        path,
        &["src", "dst", "delay", "jitter", "bandwidth", "loss", "symmetric"],
    )?;
    let bandwidth = match f.get("bandwidth") {
        None => Bandwidth::Unlimited,
        Some(v) => {
            let at = f.at("bandwidth");
            let text = match v {
                Value::Number(_) if v.as_i64().is_some_and(|b| b < 0) => {
                    return Err(schema(&at, "bandwidth must not be negative"))
                }
                _ => scalar_text(v, &at)?,
            };
            parse_bandwidth(&text).map_err(|e| schema(&at, e))?
        }
    };
    Ok(NetworkRule {
        src_layer: as_string(f.required("src")?, &f.at("src"))?,
        dst_layer: as_string(f.required("dst")?, &f.at("dst"))?,
        delay_ns: f
            .get("delay")
            .map(|v| as_duration(v, &f.at("delay")))
            .transpose()?
            .unwrap_or(0),
        jitter_ns: f
            .get("jitter")
            .map(|v| as_duration(v, &f.at("jitter")))
            .transpose()?
            .unwrap_or(0),
        bandwidth,
        loss_rate: f
            .get("loss")
            .map(|v| as_rational(v, &f.at("loss")))
            .transpose()?
            .unwrap_or_else(|| Rational::from_integer(0)),
        symmetric: f
            .get("symmetric")
            .map(|v| as_bool(v, &f.at("symmetric")))
            .transpose()?
            .unwrap_or(true),
    })
}

fn parse_phase(value: &Value, path: &str) -> Result<WorkflowPhase, SpecError> {
    let f = Fields::new(value, path, &["name", "kind", "args"])?;
    let kind_at = f.at("kind");
    let kind_text = as_string(f.required("kind")?, &kind_at)?;
    let kind = PhaseKind::parse(&kind_text).ok_or_else(|| {
        schema(
            &kind_at,
            format!("unknown phase kind `{kind_text}` (expected launch, inject, wait_until or gather)"),
        )
    })?;
    Ok(WorkflowPhase {
        name: as_string(f.required("name")?, &f.at("name"))?,
        kind,
        args: f
            .get("args")
            .map(|v| string_map(v, &f.at("args")))
            .transpose()?
            .unwrap_or_default(),
    })
}

fn param_value(value: &Value, path: &str) -> Result<ParamValue, SpecError> {
    match value {
        Value::String(s) => Ok(ParamValue::Text(s.clone())),
        Value::Bool(b) => Ok(ParamValue::Text(b.to_string())),
        Value::Number(_) => Ok(ParamValue::from_rational(as_rational(value, path)?)),
        Value::Mapping(_) => {
            let f = Fields::new(value, path, &["rational"])?;
            let at = f.at("rational");
            Ok(ParamValue::from_rational(as_rational(f.required("rational")?, &at)?))
        }
        _ => Err(schema(path, "expected a scalar domain value")),
    }
}

fn bounds<'a>(value: &'a Value, path: &str) -> Result<(&'a Value, &'a Value), SpecError> {
    match as_list(value, path)?.as_slice() {
        [lo, hi] => Ok((lo, hi)),
        _ => Err(schema(path, "expected a `[lo, hi]` pair")),
    }
}

/// Parses the `parameters` mapping (also used for standalone space files).
pub fn parse_parameters(value: &Value, path: &str) -> Result<ParameterSpace, SpecError> {
    let map = value
        .as_mapping()
        .ok_or_else(|| schema(path, "expected a mapping of name to domain"))?;
    let mut dimensions = Vec::new();
    for (k, v) in map {
        let name = k
            .as_str()
            .ok_or_else(|| schema(path, "dimension names must be strings"))?
            .to_string();
        let at = join(path, &name);
        let domain = match v {
            Value::Sequence(items) => Domain::Discrete(
                items
                    .iter()
                    .enumerate()
                    .map(|(i, item)| param_value(item, &index(&at, i)))
                    .collect::<Result<_, _>>()?,
            ),
            Value::Mapping(m) if m.contains_key("continuous") => {
                let f = Fields::new(v, &at, &["continuous"])?;
                let cat = f.at("continuous");
                let (lo, hi) = bounds(f.required("continuous")?, &cat)?;
                Domain::Continuous {
                    lo: as_rational(lo, &cat)?,
                    hi: as_rational(hi, &cat)?,
                }
            }
            Value::Mapping(_) => {
                let f = Fields::new(v, &at, &["range", "step"])?;
                let rat = f.at("range");
                let (lo, hi) = bounds(f.required("range")?, &rat)?;
                Domain::IntRange {
                    lo: as_i64(lo, &rat)?,
                    hi: as_i64(hi, &rat)?,
                    step: f
                        .get("step")
                        .map(|s| as_i64(s, &f.at("step")))
                        .transpose()?
                        .unwrap_or(1),
                }
            }
            _ => return Err(schema(&at, "expected a list, `{range, step}` or `{continuous}`")),
        };
        dimensions.push(Dimension { name, domain });
    }
    Ok(ParameterSpace { dimensions })
}

/// Parses a standalone parameter-space document (`{name: domain, ...}` or
/// `{parameters: {...}}`).
pub fn parse_space(text: &str) -> Result<ParameterSpace, SpecError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| SpecError::Syntax(e.to_string()))?;
    match doc.as_mapping().and_then(|m| m.get("parameters")) {
        Some(inner) => parse_parameters(inner, "parameters"),
        None => parse_parameters(&doc, ""),
    }
}

fn s(v: &str) -> Value {
    Value::String(v.to_string())
}

fn map_value(entries: Vec<(&str, Value)>) -> Value {
    let mut m = Mapping::new();
    for (k, v) in entries {
        m.insert(s(k), v);
    }
    Value::Mapping(m)
}

fn string_map_value(map: &BTreeMap<String, String>) -> Value {
    let mut m = Mapping::new();
    for (k, v) in map {
        m.insert(s(k), s(v));
    }
    Value::Mapping(m)
}

fn param_value_yaml(v: &ParamValue) -> Value {
    match v {
        ParamValue::Int(i) => Value::Number((*i).into()),
        ParamValue::Rat(r) => map_value(vec![("rational", s(&to_fraction_string(r)))]),
        ParamValue::Text(t) => s(t),
    }
}

/// Serializes a spec to a document that `parse_spec` reads back unchanged.
pub fn to_yaml(spec: &ExperimentSpec) -> String {
    let layers = spec
        .layers
        .iter()
        .map(|l| {
            let services = l
                .services
                .iter()
                .map(|sv| {
                    map_value(vec![
                        ("id", s(&sv.id)),
                        ("kind", s(&sv.kind)),
                        ("quantity", Value::Number(sv.quantity.into())),
                        ("cpu_capacity", s(&to_fraction_string(&sv.cpu_capacity))),
                        ("params", string_map_value(&sv.params)),
                    ])
                })
                .collect();
            map_value(vec![("name", s(&l.name)), ("services", Value::Sequence(services))])
        })
        .collect();
    let network = spec
        .network_rules
        .iter()
        .map(|r| {
            let bandwidth = match r.bandwidth {
                Bandwidth::Unlimited => s("unlimited"),
                Bandwidth::BitsPerSecond(b) => Value::Number(b.into()),
            };
            map_value(vec![
                ("src", s(&r.src_layer)),
                ("dst", s(&r.dst_layer)),
                ("delay", s(&format!("{}ns", r.delay_ns))),
                ("jitter", s(&format!("{}ns", r.jitter_ns))),
                ("bandwidth", bandwidth),
                ("loss", s(&to_fraction_string(&r.loss_rate))),
                ("symmetric", Value::Bool(r.symmetric)),
            ])
        })
        .collect();
    let workflow = spec
        .workflow
        .iter()
        .map(|p| {
            map_value(vec![
                ("name", s(&p.name)),
                ("kind", s(p.kind.as_str())),
                ("args", string_map_value(&p.args)),
            ])
        })
        .collect();
    let mut params = Mapping::new();
    for d in &spec.parameters.dimensions {
        let domain = match &d.domain {
            Domain::Discrete(values) => Value::Sequence(values.iter().map(param_value_yaml).collect()),
            Domain::IntRange { lo, hi, step } => map_value(vec![
                (
                    "range",
                    Value::Sequence(vec![Value::Number((*lo).into()), Value::Number((*hi).into())]),
                ),
                ("step", Value::Number((*step).into())),
            ]),
            Domain::Continuous { lo, hi } => map_value(vec![(
                "continuous",
                Value::Sequence(vec![s(&to_fraction_string(lo)), s(&to_fraction_string(hi))]),
            )]),
        };
        params.insert(s(&d.name), domain);
    }
    let doc = map_value(vec![
        ("name", s(&spec.name)),
        ("seed", Value::Number(spec.master_seed.into())),
        ("repetitions", Value::Number(spec.repetitions.into())),
        ("layers", Value::Sequence(layers)),
        ("network", Value::Sequence(network)),
        ("workflow", Value::Sequence(workflow)),
        ("parameters", Value::Mapping(params)),
    ]);
    serde_yaml::to_string(&doc).expect("yaml values always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
name: tiny
layers:
  - name: edge
    services:
      - id: cam
        kind: sink
";

    #[test]
    fn minimal_document_takes_defaults() {
        let spec = parse_spec(MINIMAL).unwrap();
        assert_eq!(spec.repetitions, 1);
        assert_eq!(spec.master_seed, 0);
        assert!(spec.network_rules.is_empty());
        assert!(spec.workflow.is_empty());
        assert!(spec.parameters.is_empty());
        let svc = &spec.layers[0].services[0];
        assert_eq!(svc.quantity, 1);
        assert_eq!(svc.cpu_capacity, Rational::from_integer(1));
    }

    #[test]
    fn rule_defaults_and_unit_conversion() {
        let spec = parse_spec(
            "
name: three
layers: [{name: edge}, {name: fog}, {name: cloud}]
network:
  - {src: edge, dst: cloud, delay: 50ms}
",
        )
        .unwrap();
        let rule = &spec.network_rules[0];
        assert_eq!(rule.delay_ns, 50_000_000);
        assert_eq!(rule.jitter_ns, 0);
        assert_eq!(rule.loss_rate, Rational::from_integer(0));
        assert_eq!(rule.bandwidth, Bandwidth::Unlimited);
        assert!(rule.symmetric);
    }

    #[test]
    fn unknown_key_is_schema_error() {
        let err = parse_spec("name: x\nlatyers: []\n").unwrap_err();
        match err {
            SpecError::Schema { path, message } => {
                assert_eq!(path, "latyers");
                assert!(message.contains("latyers"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nested_unknown_key_has_path() {
        let err = parse_spec("name: x\nlayers:\n  - name: edge\n    services:\n      - {id: a, kind: sink, qty: 2}\n")
            .unwrap_err();
        assert_eq!(
            err,
            SpecError::Schema {
                path: "layers[0].services[0].qty".into(),
                message: "unknown key `qty`".into()
            }
        );
    }

    #[test]
    fn malformed_yaml_is_syntax_error() {
        assert!(matches!(parse_spec("name: [unclosed"), Err(SpecError::Syntax(_))));
    }

    #[test]
    fn wrong_scalar_types_are_schema_errors() {
        let err = parse_spec("name: x\nrepetitions: two\nlayers: []\n").unwrap_err();
        assert!(matches!(err, SpecError::Schema { ref path, .. } if path == "repetitions"));
        let err = parse_spec("name: x\nlayers: []\nnetwork: [{src: a, dst: b, delay: -5}]\n").unwrap_err();
        assert!(matches!(err, SpecError::Schema { ref path, .. } if path == "network[0].delay"));
        let err = parse_spec("name: x\nlayers: []\nnetwork: [{src: a, dst: b, delay: '-5ms'}]\n").unwrap_err();
        assert!(matches!(err, SpecError::Schema { ref path, .. } if path == "network[0].delay"));
        let err = parse_spec("name: x\nlayers: []\nworkflow: [{name: p, kind: explode}]\n").unwrap_err();
        assert!(matches!(err, SpecError::Schema { ref path, .. } if path == "workflow[0].kind"));
    }

    #[test]
    fn parameter_domains() {
        let spec = parse_spec(
            "
name: p
layers: []
parameters:
  a: [1, 2.5, x]
  b: {range: [0, 4], step: 2}
  c: {continuous: [0, 0.5]}
",
        )
        .unwrap();
        let dims = &spec.parameters.dimensions;
        assert_eq!(dims[0].name, "a");
        assert_eq!(
            dims[0].domain,
            Domain::Discrete(vec![
                ParamValue::Int(1),
                ParamValue::Rat(Rational::new(5, 2)),
                ParamValue::Text("x".into())
            ])
        );
        assert_eq!(dims[1].domain, Domain::IntRange { lo: 0, hi: 4, step: 2 });
        assert_eq!(
            dims[2].domain,
            Domain::Continuous {
                lo: Rational::from_integer(0),
                hi: Rational::new(1, 2)
            }
        );
    }

    #[test]
    fn yaml_round_trip() {
        let text = "
name: rt
seed: 99
repetitions: 3
layers:
  - name: edge
    services:
      - {id: cam, kind: producer, quantity: 2, cpu_capacity: 2.5, params: {target: sink, record_bits: 1000}}
  - name: cloud
    services:
      - {id: sink, kind: sink}
network:
  - {src: edge, dst: cloud, delay: 10ms, jitter: 1us, bandwidth: 1Mbps, loss: 0.01}
workflow:
  - {name: go, kind: inject, args: {target: cam, count: 3}}
  - {name: end, kind: gather}
parameters:
  cam.record_bits: [100, 200]
  sink.base_units: {continuous: [0, 1/3]}
  cam.quantity: {range: [1, 3]}
";
        let spec = parse_spec(text).unwrap();
        let again = parse_spec(&to_yaml(&spec)).unwrap();
        assert_eq!(spec, again);
    }
}
