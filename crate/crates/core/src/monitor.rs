//! Metric collection inside the event loop and exact summaries afterwards.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::emulator::{Deployment, InstanceRuntime};
use crate::rational::{format_decimal, parse_rational, Rational};

/// Fractional digits used whenever a metric value is written out.
pub const DECIMAL_DIGITS: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    QueueLength,
    CpuUtilization,
    E2eLatencyNs,
    ThroughputRps,
    MessagesDropped,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::QueueLength,
        Metric::CpuUtilization,
        Metric::E2eLatencyNs,
        Metric::ThroughputRps,
        Metric::MessagesDropped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::QueueLength => "queue_length",
            Metric::CpuUtilization => "cpu_utilization",
            Metric::E2eLatencyNs => "e2e_latency_ns",
            Metric::ThroughputRps => "throughput_rps",
            Metric::MessagesDropped => "messages_dropped",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric `{0}`")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSample {
    pub t_ns: u64,
    /// Instance id, or `global` for run-wide metrics.
    pub source: String,
    pub metric: Metric,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSummary {
    pub metric: Metric,
    pub count: u64,
    pub min: Rational,
    pub max: Rational,
    pub mean: Rational,
    pub p50: Rational,
    pub p95: Rational,
    pub p99: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MonitorError {
    #[error("NoSamples({0})")]
    NoSamples(Metric),
}

/// Nearest-rank percentile of an ascending slice: the element at 1-based
/// rank `ceil(p/100 * n)` (rank 1 for p = 0).
pub fn nearest_rank(sorted: &[Rational], p: u32) -> Rational {
    assert!(!sorted.is_empty());
    let n = sorted.len() as u64;
    let rank = (u64::from(p) * n).div_ceil(100).clamp(1, n);
    sorted[(rank - 1) as usize]
}

fn exact_mean(values: &[Rational]) -> Rational {
    let total = values.iter().fold(BigRational::zero(), |acc, v| {
        acc + BigRational::new(BigInt::from(*v.numer()), BigInt::from(*v.denom()))
    });
    let mean = total / BigRational::from_integer(BigInt::from(values.len()));
    match (mean.numer().to_i128(), mean.denom().to_i128()) {
        (Some(n), Some(d)) => Rational::new(n, d),
        // Unreachable for in-range inputs: the mean lies between min and max.
        _ => Rational::approximate_float(mean.to_f64().unwrap_or(0.0)).unwrap_or_default(),
    }
}

/// Summary of one metric's values.
pub fn summarize_values(metric: Metric, values: &[Rational]) -> Result<MetricSummary, MonitorError> {
    if values.is_empty() {
        return Err(MonitorError::NoSamples(metric));
    }
    let mut sorted = values.to_vec();
    sorted.sort();
    let mean = exact_mean(&sorted);
    Ok(MetricSummary {
        metric,
        count: sorted.len() as u64,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        mean,
        p50: nearest_rank(&sorted, 50),
        p95: nearest_rank(&sorted, 95),
        p99: nearest_rank(&sorted, 99),
    })
}

pub fn summarize(samples: &[MetricSample], metric: Metric) -> Result<MetricSummary, MonitorError> {
    let values: Vec<Rational> = samples.iter().filter(|s| s.metric == metric).map(|s| s.value).collect();
    summarize_values(metric, &values)
}

/// Summaries for every built-in metric that has at least one sample.
pub fn summarize_all(samples: &[MetricSample]) -> Vec<MetricSummary> {
    Metric::ALL
        .into_iter()
        .filter_map(|m| summarize(samples, m).ok())
        .collect()
}

/// Per-deployment sampling state.
#[derive(Debug, Clone)]
pub struct MonitorState {
    pub interval_ns: u64,
    pub last_busy: Vec<u64>,
}

impl MonitorState {
    /// Per-instance `queue_length` and `cpu_utilization` over the last interval.
    pub fn tick(&mut self, now_ns: u64, runtimes: &[InstanceRuntime]) -> Vec<MetricSample> {
        let mut out = Vec::with_capacity(runtimes.len() * 2);
        for (i, rt) in runtimes.iter().enumerate() {
            let busy = rt.busy_ns_at(now_ns);
            let delta = busy - self.last_busy[i];
            self.last_busy[i] = busy;
            out.push(MetricSample {
                t_ns: now_ns,
                source: rt.instance_id.clone(),
                metric: Metric::QueueLength,
                value: Rational::from_integer(rt.queue_length() as i128),
            });
            out.push(MetricSample {
                t_ns: now_ns,
                source: rt.instance_id.clone(),
                metric: Metric::CpuUtilization,
                value: Rational::new(i128::from(delta), i128::from(self.interval_ns)),
            });
        }
        out
    }
}

/// Schedules periodic monitor ticks on the deployment. End-to-end latency
/// samples are always recorded at sinks; throughput and drop counts are
/// emitted by [`Deployment::finish`].
pub fn record_builtin_metrics(deployment: &mut Deployment, sample_interval_ns: u64) {
    deployment.enable_monitor(sample_interval_ns);
}

pub const CSV_HEADER: &str = "t_ns,source,metric,value";

pub fn to_csv(samples: &[MetricSample]) -> String {
    let mut out = String::with_capacity(32 * (samples.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.t_ns,
            s.source,
            s.metric,
            format_decimal(&s.value, DECIMAL_DIGITS)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("metrics csv line {line}: {message}")]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

/// Reads a metrics file back; values are the rounded decimals that were written.
pub fn from_csv(text: &str) -> Result<Vec<MetricSample>, CsvError> {
    let mut lines = text.lines();
    let err = |line: usize, message: &str| CsvError {
        line,
        message: message.to_string(),
    };
    if lines.next() != Some(CSV_HEADER) {
        return Err(err(1, "missing header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            let [t, source, metric, value] = fields.as_slice() else {
                return Err(err(i + 2, "expected 4 fields"));
            };
            Ok(MetricSample {
                t_ns: t.parse().map_err(|_| err(i + 2, "bad time"))?,
                source: source.to_string(),
                metric: metric.parse().map_err(|_| err(i + 2, "unknown metric"))?,
                value: parse_rational(value).map_err(|_| err(i + 2, "bad value"))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(values: &[i128]) -> Vec<Rational> {
        values.iter().map(|v| Rational::from_integer(*v)).collect()
    }

    #[test]
    fn nearest_rank_examples() {
        let s = summarize_values(Metric::E2eLatencyNs, &ints(&[5, 3, 1, 4, 2])).unwrap();
        assert_eq!(s.p50, Rational::from_integer(3));
        let s = summarize_values(Metric::E2eLatencyNs, &ints(&[10, 20, 30, 40])).unwrap();
        assert_eq!(s.p99, Rational::from_integer(40));
        assert_eq!(s.mean, Rational::from_integer(25));
        assert_eq!(s.p95, Rational::from_integer(40));
        assert_eq!(s.p50, Rational::from_integer(20));
    }

    #[test]
    fn single_value_summary() {
        let s = summarize_values(Metric::QueueLength, &ints(&[7])).unwrap();
        let seven = Rational::from_integer(7);
        assert_eq!(
            (s.min, s.max, s.mean, s.p50, s.p95, s.p99),
            (seven, seven, seven, seven, seven, seven)
        );
        assert_eq!(s.count, 1);
    }

    #[test]
    fn no_samples() {
        assert_eq!(
            summarize(&[], Metric::ThroughputRps),
            Err(MonitorError::NoSamples(Metric::ThroughputRps))
        );
    }

    #[test]
    fn exact_mean_of_fractions() {
        let s = summarize_values(
            Metric::CpuUtilization,
            &[Rational::new(1, 3), Rational::new(1, 6), Rational::new(1, 2)],
        )
        .unwrap();
        assert_eq!(s.mean, Rational::new(1, 3));
    }

    #[test]
    fn csv_round_trip_of_exact_decimals() {
        let samples = vec![
            MetricSample {
                t_ns: 5,
                source: "a.0".into(),
                metric: Metric::CpuUtilization,
                value: Rational::new(1, 4),
            },
            MetricSample {
                t_ns: 9,
                source: "global".into(),
                metric: Metric::ThroughputRps,
                value: Rational::from_integer(3),
            },
        ];
        let text = to_csv(&samples);
        assert_eq!(
            text,
            "t_ns,source,metric,value\n5,a.0,cpu_utilization,0.25\n9,global,throughput_rps,3\n"
        );
        assert_eq!(from_csv(&text).unwrap(), samples);
        assert!(from_csv("nope\n").is_err());
    }

    #[test]
    fn metric_names() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert!("latency".parse::<Metric>().is_err());
    }
}
