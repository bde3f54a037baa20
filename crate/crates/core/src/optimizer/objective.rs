use std::fmt;
use std::str::FromStr;

use num_traits::One;

use crate::monitor::{summarize_values, Metric, MetricSample, MetricSummary, MonitorError, UnknownMetric};
use crate::rational::{parse_rational, to_fraction_string, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregator {
    Mean,
    P50,
    P95,
    P99,
    Max,
}

impl Aggregator {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::P50 => "p50",
            Aggregator::P95 => "p95",
            Aggregator::P99 => "p99",
            Aggregator::Max => "max",
        }
    }

    pub fn pick(self, s: &MetricSummary) -> Rational {
        match self {
            Aggregator::Mean => s.mean,
            Aggregator::P50 => s.p50,
            Aggregator::P95 => s.p95,
            Aggregator::P99 => s.p99,
            Aggregator::Max => s.max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        }
    }

    /// The value as a quantity to minimize.
    pub fn orient(self, value: Rational) -> Rational {
        match self {
            Direction::Minimize => value,
            Direction::Maximize => -value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub metric: Metric,
    pub aggregator: Aggregator,
    pub direction: Direction,
    /// Weight in the scalarization that guides the surrogate.
    pub weight: Rational,
}

impl Objective {
    pub fn new(metric: Metric, aggregator: Aggregator, direction: Direction) -> Self {
        Self {
            metric,
            aggregator,
            direction,
            weight: Rational::one(),
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}:{}:{}",
            self.metric,
            self.aggregator.as_str(),
            self.direction.as_str()
        )
    }

    /// Aggregates every sample of the objective's metric.
    pub fn aggregate<'a>(&self, samples: impl IntoIterator<Item = &'a MetricSample>) -> Result<Rational, MonitorError> {
        let values: Vec<Rational> = samples
            .into_iter()
            .filter(|s| s.metric == self.metric)
            .map(|s| s.value)
            .collect();
        Ok(self.aggregator.pick(&summarize_values(self.metric, &values)?))
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())?;
        if !self.weight.is_one() {
            write!(f, ":{}", to_fraction_string(&self.weight))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ObjectiveParseError {
    #[error("objective `{0}` must look like metric:aggregator:direction[:weight]")]
    Shape(String),
    #[error(transparent)]
    UnknownMetric(#[from] UnknownMetric),
    #[error("unknown aggregator `{0}` (mean, p50, p95, p99, max)")]
    UnknownAggregator(String),
    #[error("unknown direction `{0}` (minimize, maximize)")]
    UnknownDirection(String),
    #[error("invalid weight `{0}`")]
    InvalidWeight(String),
}

impl FromStr for Objective {
    type Err = ObjectiveParseError;

    /// `metric:aggregator:direction`, optionally followed by `:weight`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(ObjectiveParseError::Shape(s.to_string()));
        }
        let metric: Metric = parts[0].parse()?;
        let aggregator = match parts[1] {
            "mean" => Aggregator::Mean,
            "p50" => Aggregator::P50,
            "p95" => Aggregator::P95,
            "p99" => Aggregator::P99,
            "max" => Aggregator::Max,
            other => return Err(ObjectiveParseError::UnknownAggregator(other.to_string())),
        };
        let direction = match parts[2] {
            "minimize" | "min" => Direction::Minimize,
            "maximize" | "max" => Direction::Maximize,
            other => return Err(ObjectiveParseError::UnknownDirection(other.to_string())),
        };
        let weight = match parts.get(3) {
            None => Rational::one(),
            Some(w) => parse_rational(w)
                .ok()
                .filter(|w| *w >= Rational::from_integer(0))
                .ok_or_else(|| ObjectiveParseError::InvalidWeight(w.to_string()))?,
        };
        Ok(Objective {
            metric,
            aggregator,
            direction,
            weight,
        })
    }
}

/// Weighted sum of direction-oriented objective values (lower is better).
pub fn scalarize(objectives: &[Objective], values: &[Rational]) -> Rational {
    objectives
        .iter()
        .zip(values)
        .map(|(o, v)| o.weight * o.direction.orient(*v))
        .sum()
}
