//! Executes workflows over provisioned deployments, one per repetition.

use rayon::prelude::*;

use crate::bench::BehaviorRegistry;
use crate::emulator::{provision_with, Counters, Deployment, Injection, ProvisionError};
use crate::mapping::{check_capacity, resolve_mapping, HostPool, Mapping, MappingError, Strategy};
use crate::monitor::{record_builtin_metrics, MetricSample};
use crate::rational::NANOS_PER_SEC;
use crate::spec::units::parse_duration_ns;
use crate::spec::{validate_spec_with, ExperimentSpec, PhaseKind, Violation, WorkflowPhase};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub sample_interval_ns: u64,
    pub dump_trace: bool,
    pub strategy: Strategy,
    /// Overrides the wall-clock creation label written to the manifest.
    pub created_label: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sample_interval_ns: NANOS_PER_SEC,
            dump_trace: false,
            strategy: Strategy::RoundRobin,
            created_label: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("repetition {repetition}: {source}")]
    Provision {
        repetition: u32,
        #[source]
        source: ProvisionError,
    },
    #[error("PhaseError({name}): {message}")]
    Phase { name: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Everything one repetition produced, before it is written out.
#[derive(Debug, Clone)]
pub struct RepetitionOutcome {
    pub repetition_index: u32,
    pub trace_digest: String,
    pub counters: Counters,
    pub horizon_ns: u64,
    pub samples: Vec<MetricSample>,
    pub trace: Option<Vec<u8>>,
}

fn phase_error(phase: &WorkflowPhase, message: impl Into<String>) -> RunError {
    RunError::Phase {
        name: phase.name.clone(),
        message: message.into(),
    }
}

fn duration_arg(phase: &WorkflowPhase, key: &str) -> Result<Option<u64>, RunError> {
    phase
        .args
        .get(key)
        .map(|v| parse_duration_ns(v).map_err(|e| phase_error(phase, format!("{key}: {e}"))))
        .transpose()
}

fn count_arg(phase: &WorkflowPhase, key: &str) -> Result<Option<u64>, RunError> {
    phase
        .args
        .get(key)
        .map(|v| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| phase_error(phase, format!("{key}: `{v}` is not a non-negative integer")))
        })
        .transpose()
}

/// Runs the workflow phases in order on a fresh deployment.
pub fn execute_workflow(deployment: &mut Deployment, workflow: &[WorkflowPhase]) -> Result<(), RunError> {
    for phase in workflow {
        deployment.mark_phase();
        match phase.kind {
            PhaseKind::Launch => {}
            PhaseKind::Inject => {
                let target = phase
                    .args
                    .get("target")
                    .ok_or_else(|| phase_error(phase, "missing target"))?;
                let injection = Injection {
                    phase: phase.name.clone(),
                    target: target.clone(),
                    count: count_arg(phase, "count")?.ok_or_else(|| phase_error(phase, "missing count"))?,
                    period_ns: duration_arg(phase, "period")?,
                    size_bits: count_arg(phase, "size")?,
                    jitter_ns: duration_arg(phase, "jitter")?.unwrap_or(0),
                };
                deployment
                    .inject(&injection)
                    .map_err(|e| phase_error(phase, e.to_string()))?;
            }
            PhaseKind::WaitUntil => {
                let t = duration_arg(phase, "sim_time")?.ok_or_else(|| phase_error(phase, "missing sim_time"))?;
                deployment.advance(t);
            }
            PhaseKind::Gather => {
                let limit = duration_arg(phase, "timeout")?.map(|t| deployment.now_ns() + t);
                deployment.drain(limit);
            }
        }
    }
    Ok(())
}

pub fn run_repetition(
    spec: &ExperimentSpec,
    mapping: &Mapping,
    repetition: u32,
    options: &RunOptions,
    registry: &BehaviorRegistry,
) -> Result<RepetitionOutcome, RunError> {
    let mut deployment = provision_with(spec, mapping, u64::from(repetition), registry)
        .map_err(|source| RunError::Provision { repetition, source })?;
    if options.dump_trace {
        deployment.enable_trace_dump();
    }
    record_builtin_metrics(&mut deployment, options.sample_interval_ns);
    execute_workflow(&mut deployment, &spec.workflow)?;
    deployment.finish();
    Ok(RepetitionOutcome {
        repetition_index: repetition,
        trace_digest: deployment.trace_digest(),
        counters: deployment.counters(),
        horizon_ns: deployment.now_ns(),
        trace: deployment.trace_dump().map(<[u8]>::to_vec),
        samples: deployment.take_samples(),
    })
}

/// Validation, capacity check and mapping shared by every run.
pub fn prepare(
    spec: &ExperimentSpec,
    pool: &HostPool,
    options: &RunOptions,
    registry: &BehaviorRegistry,
) -> Result<Mapping, RunError> {
    let mut violations = validate_spec_with(spec, registry);
    violations.extend(check_capacity(spec, pool));
    if !violations.is_empty() {
        crate::spec::validate::sort_violations(&mut violations);
        return Err(RunError::Invalid(violations));
    }
    Ok(resolve_mapping(spec, pool, options.strategy)?)
}

/// Runs every repetition in memory. Repetitions execute in parallel; the
/// result is ordered by repetition index.
pub fn execute(
    spec: &ExperimentSpec,
    mapping: &Mapping,
    options: &RunOptions,
    registry: &BehaviorRegistry,
) -> Result<Vec<RepetitionOutcome>, RunError> {
    (0..spec.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(spec, mapping, r, options, registry))
        .collect()
}
