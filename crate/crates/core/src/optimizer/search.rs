//! Search loops over parameter spaces and their reports.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::analysis::{pareto_front, pearson};
use super::objective::{scalarize, Objective};
use super::space::{enumerate_grid, sample_random, Point, SpaceError};
use super::surrogate::{default_lambda, surrogate_suggest, DEFAULT_POOL_SIZE};
use crate::archive::{execute, prepare, run_experiment_with, RunError, RunOptions};
use crate::bench::BehaviorRegistry;
use crate::mapping::HostPool;
use crate::monitor::{Metric, DECIMAL_DIGITS};
use crate::rational::{format_decimal, Rational};
use crate::rng::SplitMix64;
use crate::spec::{validate_spec_with, ExperimentSpec, ParamValue, ParameterSpace, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Strategy {
    Grid,
    #[default]
    Random,
    Surrogate,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Grid => "grid",
            Strategy::Random => "random",
            Strategy::Surrogate => "surrogate",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" => Ok(Strategy::Grid),
            "random" => Ok(Strategy::Random),
            "surrogate" => Ok(Strategy::Surrogate),
            other => Err(format!("unknown strategy `{other}` (grid, random, surrogate)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub budget: usize,
    pub master_seed: u64,
    /// Points suggested before any of their results are observed.
    pub batch_size: usize,
    pub pool_size: usize,
    pub lambda: Rational,
}

impl SearchConfig {
    pub fn new(strategy: Strategy, budget: usize, master_seed: u64) -> Self {
        Self {
            strategy,
            budget,
            master_seed,
            batch_size: 1,
            pool_size: DEFAULT_POOL_SIZE,
            lambda: default_lambda(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub index: usize,
    pub point: Point,
    pub objectives: Vec<Rational>,
    pub archive: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub parameter: String,
    pub objective: String,
    /// `None` when either variance is zero.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub strategy: Strategy,
    pub budget_used: usize,
    pub dimensions: Vec<String>,
    pub objectives: Vec<Objective>,
    pub evaluations: Vec<Evaluation>,
    /// Best evaluation for a single objective (first on ties).
    pub best: Option<usize>,
    pub pareto: Vec<usize>,
    pub correlations: Vec<Correlation>,
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("at least one objective is required")]
    NoObjectives,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("parameter space is empty")]
    EmptySpace,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error("NonNumericParameter({0})")]
    NonNumericParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("evaluation {index}: {message}")]
    Materialize { index: usize, message: String },
    #[error("evaluation {index}: no `{metric}` samples")]
    NoSamples { index: usize, metric: Metric },
    #[error("evaluation {index}: {source}")]
    Run {
        index: usize,
        #[source]
        source: RunError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Evaluates points chosen by `config.strategy` until the budget is spent or
/// the space runs out. `evaluate` receives the evaluation index and point
/// and returns one value per objective; batches run in parallel and merge in
/// index order.
pub fn search<F>(
    space: &ParameterSpace,
    objectives: &[Objective],
    config: &SearchConfig,
    evaluate: F,
) -> Result<OptimizationResult, OptimizeError>
where
    F: Fn(usize, &Point) -> Result<Vec<Rational>, OptimizeError> + Sync,
{
    if objectives.is_empty() {
        return Err(OptimizeError::NoObjectives);
    }
    if config.budget == 0 {
        return Err(OptimizeError::ZeroBudget);
    }
    if space.is_empty() {
        return Err(OptimizeError::EmptySpace);
    }
    let grid = match config.strategy {
        Strategy::Grid => enumerate_grid(space)?,
        _ => Vec::new(),
    };
    let mut rng = SplitMix64::for_role(config.master_seed, "optimizer", &[config.strategy.as_str()], 0);
    let mut evaluations: Vec<Evaluation> = Vec::new();
    let mut history: Vec<(Point, Rational)> = Vec::new();
    'outer: while evaluations.len() < config.budget {
        let want = config.batch_size.max(1).min(config.budget - evaluations.len());
        let mut batch: Vec<Point> = Vec::with_capacity(want);
        for _ in 0..want {
            let next = match config.strategy {
                Strategy::Grid => grid.get(evaluations.len() + batch.len()).cloned(),
                Strategy::Random => sample_random(space, 1, &mut rng).pop(),
                // The only suggestion error is an exhausted space, which ends the search.
                Strategy::Surrogate => {
                    surrogate_suggest(space, &history, &batch, &mut rng, config.pool_size, &config.lambda).ok()
                }
            };
            match next {
                Some(p) => batch.push(p),
                None => break,
            }
        }
        if batch.is_empty() {
            break 'outer;
        }
        let base = evaluations.len();
        let results: Vec<Result<Vec<Rational>, OptimizeError>> = batch
            .par_iter()
            .enumerate()
            .map(|(i, p)| evaluate(base + i, p))
            .collect();
        for (i, (point, result)) in batch.into_iter().zip(results).enumerate() {
            let values = result?;
            history.push((point.clone(), scalarize(objectives, &values)));
            evaluations.push(Evaluation {
                index: base + i,
                point,
                objectives: values,
                archive: None,
            });
        }
    }
    Ok(finalize(space, objectives, config.strategy, evaluations))
}

fn finalize(
    space: &ParameterSpace,
    objectives: &[Objective],
    strategy: Strategy,
    evaluations: Vec<Evaluation>,
) -> OptimizationResult {
    let vectors: Vec<Vec<Rational>> = evaluations.iter().map(|e| e.objectives.clone()).collect();
    let directions: Vec<_> = objectives.iter().map(|o| o.direction).collect();
    let best = (objectives.len() == 1)
        .then(|| {
            evaluations
                .iter()
                .min_by(|a, b| {
                    let (x, y) = (
                        directions[0].orient(a.objectives[0]),
                        directions[0].orient(b.objectives[0]),
                    );
                    x.cmp(&y).then(a.index.cmp(&b.index))
                })
                .map(|e| e.index)
        })
        .flatten();
    let mut correlations = Vec::new();
    for dim in &space.dimensions {
        for (o, objective) in objectives.iter().enumerate() {
            if let Ok(r) = correlate(&evaluations, space, &dim.name, o) {
                correlations.push(Correlation {
                    parameter: dim.name.clone(),
                    objective: objective.label(),
                    r,
                });
            }
        }
    }
    OptimizationResult {
        strategy,
        budget_used: evaluations.len(),
        dimensions: space.dimensions.iter().map(|d| d.name.clone()).collect(),
        objectives: objectives.to_vec(),
        pareto: pareto_front(&vectors, &directions),
        best,
        evaluations,
        correlations,
    }
}

/// Pearson correlation between a numeric parameter and one objective over
/// the evaluations.
pub fn correlate(
    evaluations: &[Evaluation],
    space: &ParameterSpace,
    parameter: &str,
    objective: usize,
) -> Result<Option<f64>, OptimizeError> {
    let d = space
        .position(parameter)
        .ok_or_else(|| OptimizeError::UnknownParameter(parameter.to_string()))?;
    let xs: Option<Vec<Rational>> = evaluations.iter().map(|e| e.point[d].as_rational()).collect();
    let xs = xs.ok_or_else(|| OptimizeError::NonNumericParameter(parameter.to_string()))?;
    let ys: Vec<Rational> = evaluations.iter().map(|e| e.objectives[objective]).collect();
    Ok(pearson(&xs, &ys))
}

/// A copy of `spec` with the point's values substituted. Dimensions are
/// named `<service>.<param>`; `quantity` and `cpu_capacity` override the
/// service fields, anything else becomes a behavior parameter.
pub fn materialize(
    spec: &ExperimentSpec,
    space: &ParameterSpace,
    point: &[ParamValue],
) -> Result<ExperimentSpec, String> {
    let mut derived = spec.clone();
    derived.parameters = ParameterSpace::default();
    for (dim, value) in space.dimensions.iter().zip(point) {
        let (service, param) = dim
            .name
            .split_once('.')
            .ok_or_else(|| format!("parameter `{}` is not of the form <service>.<param>", dim.name))?;
        let svc = derived
            .service_mut(service)
            .ok_or_else(|| format!("parameter `{}` names unknown service `{service}`", dim.name))?;
        match param {
            "quantity" => {
                svc.quantity = match value {
                    ParamValue::Int(q) => {
                        u32::try_from(*q).map_err(|_| format!("{}: quantity {q} out of range", dim.name))?
                    }
                    other => return Err(format!("{}: quantity must be an integer, got {other}", dim.name)),
                }
            }
            "cpu_capacity" => {
                svc.cpu_capacity = value
                    .as_rational()
                    .ok_or_else(|| format!("{}: cpu_capacity must be numeric", dim.name))?
            }
            _ => {
                svc.params.insert(param.to_string(), value.to_string());
            }
        }
    }
    Ok(derived)
}

/// Where and how each evaluation of [`optimize_loop`] runs.
#[derive(Debug, Clone, Default)]
pub struct LoopOptions {
    /// Archives go to `out_dir/eval_<k>` when set; otherwise runs stay in memory.
    pub out_dir: Option<PathBuf>,
    pub run: RunOptions,
}

/// Searches `space` by running the experiment at every chosen point. Each
/// derived spec runs with `config.master_seed`, so points are compared under
/// identical random streams.
pub fn optimize_loop(
    spec: &ExperimentSpec,
    pool: &HostPool,
    space: &ParameterSpace,
    objectives: &[Objective],
    config: &SearchConfig,
    options: &LoopOptions,
) -> Result<OptimizationResult, OptimizeError> {
    let registry = BehaviorRegistry::builtin();
    let mut with_space = spec.clone();
    with_space.parameters = space.clone();
    let violations = validate_spec_with(&with_space, &registry);
    if !violations.is_empty() {
        return Err(OptimizeError::Invalid(violations));
    }
    let evaluate = |index: usize, point: &Point| -> Result<Vec<Rational>, OptimizeError> {
        let mut derived =
            materialize(spec, space, point).map_err(|message| OptimizeError::Materialize { index, message })?;
        derived.master_seed = config.master_seed;
        let run_err = |source| OptimizeError::Run { index, source };
        let samples = match &options.out_dir {
            Some(dir) => {
                let archive = run_experiment_with(
                    &derived,
                    pool,
                    dir.join(format!("eval_{index}")),
                    &options.run,
                    &registry,
                )
                .map_err(run_err)?;
                archive.samples.into_iter().flatten().collect::<Vec<_>>()
            }
            None => {
                let mapping = prepare(&derived, pool, &options.run, &registry).map_err(run_err)?;
                execute(&derived, &mapping, &options.run, &registry)
                    .map_err(run_err)?
                    .into_iter()
                    .flat_map(|o| o.samples)
                    .collect()
            }
        };
        objectives
            .iter()
            .map(|o| {
                o.aggregate(&samples).map_err(|_| OptimizeError::NoSamples {
                    index,
                    metric: o.metric,
                })
            })
            .collect()
    };
    let mut result = search(space, objectives, config, evaluate)?;
    if let Some(dir) = &options.out_dir {
        for e in &mut result.evaluations {
            e.archive = Some(dir.join(format!("eval_{}", e.index)));
        }
    }
    Ok(result)
}

fn decimal(r: &Rational) -> String {
    format_decimal(r, DECIMAL_DIGITS)
}

impl OptimizationResult {
    pub fn to_json(&self) -> Value {
        let evaluations: Vec<Value> = self
            .evaluations
            .iter()
            .map(|e| {
                let point: serde_json::Map<String, Value> = self
                    .dimensions
                    .iter()
                    .zip(&e.point)
                    .map(|(n, v)| (n.clone(), Value::String(v.to_string())))
                    .collect();
                json!({
                    "index": e.index,
                    "point": point,
                    "objectives": e.objectives.iter().map(decimal).collect::<Vec<_>>(),
                    "archive": e.archive.as_ref().map(|p| p.display().to_string()),
                })
            })
            .collect();
        json!({
            "strategy": self.strategy.as_str(),
            "budget_used": self.budget_used,
            "dimensions": self.dimensions,
            "objectives": self.objectives.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "evaluations": evaluations,
            "best": self.best,
            "pareto": self.pareto,
            "correlations": self.correlations.iter().map(|c| json!({
                "parameter": c.parameter,
                "objective": c.objective,
                "r": c.r,
            })).collect::<Vec<_>>(),
        })
    }

    /// `index,<dimensions...>,<objective labels...>` then one row per evaluation.
    pub fn to_csv(&self) -> String {
        let mut header: Vec<String> = vec!["index".into()];
        header.extend(self.dimensions.iter().cloned());
        header.extend(self.objectives.iter().map(Objective::label));
        let mut out = header.join(",");
        out.push('\n');
        for e in &self.evaluations {
            let mut row = vec![e.index.to_string()];
            row.extend(e.point.iter().map(ToString::to_string));
            row.extend(e.objectives.iter().map(decimal));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes `optimization.json` and `evaluations.csv` into `dir`.
    pub fn write_reports(&self, dir: &Path) -> Result<(), OptimizeError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| OptimizeError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let json_path = dir.join("optimization.json");
        let mut text = serde_json::to_string_pretty(&self.to_json()).expect("json values always serialize");
        text.push('\n');
        std::fs::write(&json_path, text).map_err(io(&json_path))?;
        let csv_path = dir.join("evaluations.csv");
        std::fs::write(&csv_path, self.to_csv()).map_err(io(&csv_path))?;
        Ok(())
    }

    /// `best name=value ... objective=value` for a single objective,
    /// `pareto <size>` otherwise.
    pub fn summary_line(&self) -> String {
        match self.best.filter(|_| self.objectives.len() == 1) {
            Some(b) => {
                let e = &self.evaluations[b];
                let mut parts = vec!["best".to_string()];
                parts.extend(self.dimensions.iter().zip(&e.point).map(|(n, v)| format!("{n}={v}")));
                parts.push(format!("{}={}", self.objectives[0].label(), decimal(&e.objectives[0])));
                parts.join(" ")
            }
            None => format!("pareto {}", self.pareto.len()),
        }
    }
}
