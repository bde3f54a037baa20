use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use continuum_core::archive::{
    run_experiment_with, verify_repeatability, ArchiveError, ExperimentArchive, Repeatability, RunError, RunOptions,
};
use continuum_core::bench::{build_scenario, BehaviorRegistry, ScenarioParams};
use continuum_core::mapping::{check_capacity, HostPool, Strategy as MappingStrategy};
use continuum_core::optimizer::{optimize_loop, LoopOptions, Objective, OptimizeError, SearchConfig, Strategy};
use continuum_core::spec::validate::sort_violations;
use continuum_core::spec::{parse_space, parse_spec, to_yaml, validate_spec, ExperimentSpec, Violation};

/// Reproducible edge-to-cloud continuum experiments.
#[derive(Debug, Parser)]
#[command(name = "continuum-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an experiment file and print its violations.
    Validate {
        spec: PathBuf,
        /// Also check layer capacity against this host pool.
        #[arg(long)]
        hosts: Option<PathBuf>,
    },
    /// Run every repetition and write an archive.
    Run {
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        spec: Option<PathBuf>,
        /// Run a built-in scenario instead of a file (cloud_centric, hybrid, quadratic).
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        hosts: Option<PathBuf>,
        /// Overrides the spec's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Placement of instances on hosts.
        #[arg(long, default_value = "round_robin")]
        mapping: MappingStrategy,
        /// Also write the effective spec as YAML.
        #[arg(long)]
        emit_spec: Option<PathBuf>,
    },
    /// Compare two archives for repeatability.
    Diff { a: PathBuf, b: PathBuf },
    /// Search a parameter space over repeated runs.
    Optimize {
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        spec: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Parameter space file; defaults to the spec's own `parameters`.
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long, default_value = "surrogate")]
        strategy: Strategy,
        #[arg(long, default_value_t = 20)]
        budget: usize,
        /// `metric:aggregator:direction[:weight]`, repeatable.
        #[arg(long = "objective", required = true)]
        objectives: Vec<Objective>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        hosts: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Points evaluated in parallel between suggestions.
        #[arg(long, default_value_t = 1)]
        batch: usize,
    },
    /// Print per-repetition metric summaries of an archive.
    Report {
        archive: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// A failed command: message for standard error and its exit status.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Runtime(String),
    Divergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Divergence(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) | Failure::Divergence(m) => f.write_str(m),
        }
    }
}

fn violations(mut v: Vec<Violation>) -> Failure {
    sort_violations(&mut v);
    Failure::Validation(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<ExperimentSpec, Failure> {
    parse_spec(&read(path)?).map_err(|e| Failure::Validation(e.to_string()))
}

fn load_pool(hosts: Option<&Path>, spec: &ExperimentSpec) -> Result<HostPool, Failure> {
    match hosts {
        Some(path) => HostPool::from_yaml(&read(path)?).map_err(|e| Failure::Validation(e.to_string())),
        None => Ok(HostPool::synthesize(spec)),
    }
}

fn spec_or_preset(spec: Option<&Path>, preset: Option<&str>) -> Result<ExperimentSpec, Failure> {
    match (spec, preset) {
        (Some(path), _) => load_spec(path),
        (None, Some(name)) => {
            build_scenario(name, &ScenarioParams::default()).map_err(|e| Failure::Validation(e.to_string()))
        }
        (None, None) => Err(Failure::Validation("a spec file or --preset is required".into())),
    }
}

fn load_archive(dir: &Path) -> Result<ExperimentArchive, Failure> {
    ExperimentArchive::load(dir).map_err(|e| match e {
        ArchiveError::Corrupt { .. } => Failure::Divergence(format!("{}: {e}", dir.display())),
        ArchiveError::Io { .. } => Failure::Runtime(e.to_string()),
    })
}

fn run_failure(e: RunError) -> Failure {
    match e {
        RunError::Invalid(v) => violations(v),
        RunError::Mapping(_) => Failure::Validation(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    }
}

fn trace_requested() -> bool {
    std::env::var("CONTINUUM_LAB_TRACE").is_ok_and(|v| v == "1")
}

fn cmd_validate(spec: &Path, hosts: Option<&Path>) -> Result<(), Failure> {
    let spec = load_spec(spec)?;
    let mut found = validate_spec(&spec);
    if let Some(path) = hosts {
        found.extend(check_capacity(&spec, &load_pool(Some(path), &spec)?));
    }
    if found.is_empty() {
        Ok(())
    } else {
        Err(violations(found))
    }
}

struct RunArgs<'a> {
    spec: Option<&'a Path>,
    preset: Option<&'a str>,
    hosts: Option<&'a Path>,
    seed: Option<u64>,
    out: &'a Path,
    mapping: MappingStrategy,
    emit_spec: Option<&'a Path>,
}

fn cmd_run(args: RunArgs<'_>) -> Result<(), Failure> {
    let mut spec = spec_or_preset(args.spec, args.preset)?;
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    let pool = load_pool(args.hosts, &spec)?;
    if let Some(path) = args.emit_spec {
        fs::write(path, to_yaml(&spec)).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    let options = RunOptions {
        dump_trace: trace_requested(),
        strategy: args.mapping,
        ..RunOptions::default()
    };
    let archive =
        run_experiment_with(&spec, &pool, args.out, &options, &BehaviorRegistry::builtin()).map_err(run_failure)?;
    for r in &archive.results {
        eprintln!(
            "rep {}: {} records, {} dropped, horizon {} ns",
            r.repetition_index, r.completed_records, r.dropped, r.horizon_ns
        );
    }
    println!("{}", archive.manifest_digest());
    Ok(())
}

fn cmd_diff(a: &Path, b: &Path) -> Result<(), Failure> {
    let (a, b) = (load_archive(a)?, load_archive(b)?);
    match verify_repeatability(&a, &b) {
        Repeatability::Identical => {
            println!("IDENTICAL");
            Ok(())
        }
        Repeatability::Divergent(paths) => {
            println!("DIVERGENT");
            for p in &paths {
                println!("{p}");
            }
            Err(Failure::Divergence(format!(
                "archives differ in {} field(s)",
                paths.len()
            )))
        }
    }
}

struct OptimizeArgs<'a> {
    spec: Option<&'a Path>,
    preset: Option<&'a str>,
    space: Option<&'a Path>,
    strategy: Strategy,
    budget: usize,
    objectives: &'a [Objective],
    out: &'a Path,
    hosts: Option<&'a Path>,
    seed: Option<u64>,
    batch: usize,
}

fn cmd_optimize(args: OptimizeArgs<'_>) -> Result<(), Failure> {
    let spec = spec_or_preset(args.spec, args.preset)?;
    let space = match args.space {
        Some(path) => parse_space(&read(path)?).map_err(|e| Failure::Validation(e.to_string()))?,
        None => spec.parameters.clone(),
    };
    let pool = load_pool(args.hosts, &spec)?;
    let mut config = SearchConfig::new(args.strategy, args.budget, args.seed.unwrap_or(spec.master_seed));
    config.batch_size = args.batch;
    let options = LoopOptions {
        out_dir: Some(args.out.to_path_buf()),
        run: RunOptions {
            dump_trace: trace_requested(),
            ..RunOptions::default()
        },
    };
    let result = optimize_loop(&spec, &pool, &space, args.objectives, &config, &options).map_err(|e| match e {
        OptimizeError::Invalid(v) => violations(v),
        OptimizeError::NoObjectives
        | OptimizeError::ZeroBudget
        | OptimizeError::EmptySpace
        | OptimizeError::Space(_)
        | OptimizeError::NonNumericParameter(_)
        | OptimizeError::UnknownParameter(_)
        | OptimizeError::Materialize { .. } => Failure::Validation(e.to_string()),
        OptimizeError::Run { source, index } => match run_failure(source) {
            Failure::Validation(m) => Failure::Validation(format!("evaluation {index}: {m}")),
            other => Failure::Runtime(format!("evaluation {index}: {other}")),
        },
        other => Failure::Runtime(other.to_string()),
    })?;
    result
        .write_reports(args.out)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    eprintln!("{} evaluations ({})", result.budget_used, result.strategy);
    println!("{}", result.summary_line());
    Ok(())
}

fn cmd_report(dir: &Path, format: Format) -> Result<(), Failure> {
    let archive = load_archive(dir)?;
    match format {
        Format::Json => {
            let repetitions: Vec<_> = archive
                .results
                .iter()
                .map(|r| serde_json::to_value(r).expect("result serializes"))
                .collect();
            let doc = json!({
                "manifest_digest": archive.manifest_digest(),
                "spec_digest": archive.manifest.spec_digest,
                "master_seed": archive.manifest.master_seed,
                "repetitions": repetitions,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("json values always serialize")
            );
        }
        Format::Csv => {
            println!("repetition,metric,count,min,max,mean,p50,p95,p99");
            for r in &archive.results {
                for s in &r.summaries {
                    println!(
                        "{},{},{},{},{},{},{},{},{}",
                        r.repetition_index, s.metric, s.count, s.min, s.max, s.mean, s.p50, s.p95, s.p99
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate { spec, hosts } => cmd_validate(spec, hosts.as_deref()),
        Command::Run {
            spec,
            preset,
            hosts,
            seed,
            out,
            mapping,
            emit_spec,
        } => cmd_run(RunArgs {
            spec: spec.as_deref(),
            preset: preset.as_deref(),
            hosts: hosts.as_deref(),
            seed: *seed,
            out,
            mapping: *mapping,
            emit_spec: emit_spec.as_deref(),
        }),
        Command::Diff { a, b } => cmd_diff(a, b),
        Command::Optimize {
            spec,
            preset,
            space,
            strategy,
            budget,
            objectives,
            out,
            hosts,
            seed,
            batch,
        } => cmd_optimize(OptimizeArgs {
            spec: spec.as_deref(),
            preset: preset.as_deref(),
            space: space.as_deref(),
            strategy: *strategy,
            budget: *budget,
            objectives,
            out,
            hosts: hosts.as_deref(),
            seed: *seed,
            batch: *batch,
        }),
        Command::Report { archive, format } => cmd_report(archive, *format),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(failure.code())
        }
    }
}
