//! Service behaviors: how much work a message costs and what a service emits
//! once it finishes processing one.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::{ceil_nonneg, parse_rational, Rational};
use crate::rng::SplitMix64;
use crate::spec::units::parse_duration_ns;

/// Record generation parameters of a producer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emission {
    pub record_bits: u64,
    pub period_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completion {
    /// Terminal: the record is complete and its latency is recorded.
    Sink,
    /// Output message sizes, all addressed to the behavior's target.
    Forward(Vec<u64>),
}

pub trait Behavior: Send + fmt::Debug {
    fn kind(&self) -> &'static str;

    fn base_units(&self) -> Rational;

    fn per_bit_units(&self) -> Rational;

    fn target(&self) -> Option<&str> {
        None
    }

    fn emission(&self) -> Option<Emission> {
        None
    }

    /// Called when a message of `input_bits` finishes service.
    fn complete(&mut self, input_bits: u64, rng: &mut SplitMix64) -> Completion;

    /// Work units needed to serve a message of `size_bits`.
    fn work_units(&self, size_bits: u64) -> Rational {
        self.base_units() + self.per_bit_units() * Rational::from_integer(i128::from(size_bits))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parameter `{key}`: {message}")]
pub struct ParamError {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("unknown behavior `{0}`")]
    UnknownKind(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

pub type Params = BTreeMap<String, String>;
type Factory = fn(&Params) -> Result<Box<dyn Behavior>, ParamError>;

#[derive(Clone)]
struct Entry {
    params: &'static [&'static str],
    factory: Factory,
}

/// Maps behavior kind names to constructors.
#[derive(Clone, Default)]
pub struct BehaviorRegistry {
    entries: BTreeMap<String, Entry>,
}

impl fmt::Debug for BehaviorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.entries.keys()).finish()
    }
}

impl BehaviorRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `producer`, `transformer`, `sink` and `quadratic_sink`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("producer", PRODUCER_PARAMS, |p| Ok(Box::new(Producer::from_params(p)?)));
        r.register("transformer", TRANSFORMER_PARAMS, |p| {
            Ok(Box::new(Transformer::from_params(p)?))
        });
        r.register("sink", SINK_PARAMS, |p| Ok(Box::new(Sink::from_params(p)?)));
        r.register("quadratic_sink", QUADRATIC_PARAMS, |p| {
            Ok(Box::new(QuadraticSink::from_params(p)?))
        });
        r
    }

    pub fn register(&mut self, kind: &str, params: &'static [&'static str], factory: Factory) {
        self.entries.insert(kind.to_string(), Entry { params, factory });
    }

    pub fn contains(&self, kind: &str) -> bool {
        self.entries.contains_key(kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parameter keys a kind accepts.
    pub fn params_of(&self, kind: &str) -> Option<&'static [&'static str]> {
        self.entries.get(kind).map(|e| e.params)
    }

    pub fn build(&self, kind: &str, params: &Params) -> Result<Box<dyn Behavior>, BuildError> {
        let entry = self
            .entries
            .get(kind)
            .ok_or_else(|| BuildError::UnknownKind(kind.to_string()))?;
        if let Some(key) = params.keys().find(|k| !entry.params.contains(&k.as_str())) {
            return Err(ParamError {
                key: key.clone(),
                message: format!("`{kind}` does not take this parameter"),
            }
            .into());
        }
        Ok((entry.factory)(params)?)
    }
}

fn err(key: &str, message: impl Into<String>) -> ParamError {
    ParamError {
        key: key.to_string(),
        message: message.into(),
    }
}

fn rational_param(p: &Params, key: &str, default: Rational) -> Result<Rational, ParamError> {
    match p.get(key) {
        None => Ok(default),
        Some(text) => parse_rational(text).map_err(|e| err(key, e.to_string())),
    }
}

fn non_negative(p: &Params, key: &str) -> Result<Rational, ParamError> {
    let v = rational_param(p, key, Rational::zero())?;
    if v.is_negative() {
        return Err(err(key, "must not be negative"));
    }
    Ok(v)
}

fn unit_interval(p: &Params, key: &str, allow_zero: bool) -> Result<Rational, ParamError> {
    let v = rational_param(p, key, Rational::one())?;
    let low_ok = if allow_zero { !v.is_negative() } else { v.is_positive() };
    if !low_ok || v > Rational::one() {
        let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
        return Err(err(key, format!("must lie in {range}")));
    }
    Ok(v)
}

fn target(p: &Params) -> Result<String, ParamError> {
    match p.get("target") {
        Some(t) if !t.trim().is_empty() => Ok(t.clone()),
        _ => Err(err("target", "a forwarding target service is required")),
    }
}

const PRODUCER_PARAMS: &[&str] = &["base_units", "per_bit_units", "record_bits", "period", "target"];
const TRANSFORMER_PARAMS: &[&str] = &["base_units", "per_bit_units", "factor", "pass_rate", "target"];
const SINK_PARAMS: &[&str] = &["base_units", "per_bit_units"];
const QUADRATIC_PARAMS: &[&str] = &["a", "b", "center_a", "center_b", "scale"];

/// Generates records on injection ticks and forwards them unchanged.
#[derive(Debug, Clone)]
pub struct Producer {
    pub base_units: Rational,
    pub per_bit_units: Rational,
    pub emission: Emission,
    pub target: String,
}

impl Producer {
    pub fn from_params(p: &Params) -> Result<Self, ParamError> {
        let record_bits = match p.get("record_bits") {
            None => 8_000,
            Some(t) => t
                .parse::<u64>()
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| err("record_bits", "must be a positive integer"))?,
        };
        let period_ns = match p.get("period") {
            None => 1_000_000_000,
            Some(t) => match parse_duration_ns(t) {
                Ok(v) if v > 0 => v,
                Ok(_) => return Err(err("period", "must be positive")),
                Err(e) => return Err(err("period", e)),
            },
        };
        Ok(Self {
            base_units: non_negative(p, "base_units")?,
            per_bit_units: non_negative(p, "per_bit_units")?,
            emission: Emission { record_bits, period_ns },
            target: target(p)?,
        })
    }
}

impl Behavior for Producer {
    fn kind(&self) -> &'static str {
        "producer"
    }
    fn base_units(&self) -> Rational {
        self.base_units
    }
    fn per_bit_units(&self) -> Rational {
        self.per_bit_units
    }
    fn target(&self) -> Option<&str> {
        Some(&self.target)
    }
    fn emission(&self) -> Option<Emission> {
        Some(self.emission)
    }
    fn complete(&mut self, input_bits: u64, _rng: &mut SplitMix64) -> Completion {
        Completion::Forward(vec![input_bits])
    }
}

/// Shrinks each message by `factor` (output `ceil(factor * size)`, at least
/// one bit) and forwards it with probability `pass_rate`.
#[derive(Debug, Clone)]
pub struct Transformer {
    pub base_units: Rational,
    pub per_bit_units: Rational,
    pub factor: Rational,
    pub pass_rate: Rational,
    pub target: String,
}

impl Transformer {
    pub fn from_params(p: &Params) -> Result<Self, ParamError> {
        Ok(Self {
            base_units: non_negative(p, "base_units")?,
            per_bit_units: non_negative(p, "per_bit_units")?,
            factor: unit_interval(p, "factor", false)?,
            pass_rate: unit_interval(p, "pass_rate", true)?,
            target: target(p)?,
        })
    }

    pub fn output_bits(&self, input_bits: u64) -> u64 {
        ceil_nonneg(&(self.factor * Rational::from_integer(i128::from(input_bits)))).max(1)
    }
}

impl Behavior for Transformer {
    fn kind(&self) -> &'static str {
        "transformer"
    }
    fn base_units(&self) -> Rational {
        self.base_units
    }
    fn per_bit_units(&self) -> Rational {
        self.per_bit_units
    }
    fn target(&self) -> Option<&str> {
        Some(&self.target)
    }
    fn complete(&mut self, input_bits: u64, rng: &mut SplitMix64) -> Completion {
        // The rng is only consulted for a real filter so streams stay aligned.
        if self.pass_rate < Rational::one() && !rng.chance(&self.pass_rate) {
            return Completion::Forward(Vec::new());
        }
        Completion::Forward(vec![self.output_bits(input_bits)])
    }
}

#[derive(Debug, Clone)]
pub struct Sink {
    pub base_units: Rational,
    pub per_bit_units: Rational,
}

impl Sink {
    pub fn from_params(p: &Params) -> Result<Self, ParamError> {
        Ok(Self {
            base_units: non_negative(p, "base_units")?,
            per_bit_units: non_negative(p, "per_bit_units")?,
        })
    }
}

impl Behavior for Sink {
    fn kind(&self) -> &'static str {
        "sink"
    }
    fn base_units(&self) -> Rational {
        self.base_units
    }
    fn per_bit_units(&self) -> Rational {
        self.per_bit_units
    }
    fn complete(&mut self, _input_bits: u64, _rng: &mut SplitMix64) -> Completion {
        Completion::Sink
    }
}

/// Terminal service whose work per message is
/// `scale * ((a - center_a)^2 + (b - center_b)^2)`. With `cpu_capacity`
/// equal to 10^9 units/s the recorded latency is that value in nanoseconds,
/// which makes it a closed-form benchmark for parameter search.
#[derive(Debug, Clone)]
pub struct QuadraticSink {
    pub work: Rational,
}

impl QuadraticSink {
    pub fn from_params(p: &Params) -> Result<Self, ParamError> {
        let zero = Rational::zero();
        let a = rational_param(p, "a", zero)? - rational_param(p, "center_a", zero)?;
        let b = rational_param(p, "b", zero)? - rational_param(p, "center_b", zero)?;
        let scale = rational_param(p, "scale", Rational::one())?;
        if scale.is_negative() {
            return Err(err("scale", "must not be negative"));
        }
        Ok(Self {
            work: scale * (a * a + b * b),
        })
    }
}

impl Behavior for QuadraticSink {
    fn kind(&self) -> &'static str {
        "quadratic_sink"
    }
    fn base_units(&self) -> Rational {
        self.work
    }
    fn per_bit_units(&self) -> Rational {
        Rational::zero()
    }
    fn complete(&mut self, _input_bits: u64, _rng: &mut SplitMix64) -> Completion {
        Completion::Sink
    }
}
