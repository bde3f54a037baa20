//! On-disk archive layout, self-verification and repeatability diffs.
//!
//! ```text
//! out_dir/
//!   manifest.json       canonical key-sorted JSON, digests of every file below
//!   spec.canonical      canonical spec serialization
//!   mapping.tsv         instance<TAB>host lines
//!   rep_<k>/metrics.csv
//!   rep_<k>/result.json
//!   rep_<k>/trace.log   only when trace dumping is enabled
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runner::{execute, prepare, RepetitionOutcome, RunError, RunOptions};
use crate::bench::BehaviorRegistry;
use crate::mapping::{HostPool, Mapping};
use crate::monitor::{from_csv, summarize_all, to_csv, Metric, MetricSample, MetricSummary, DECIMAL_DIGITS};
use crate::rational::{format_decimal, parse_rational};
use crate::spec::{canonical_digest, canonical_string, sha256_hex, ExperimentSpec};
use crate::TOOL_VERSION;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPEC_FILE: &str = "spec.canonical";
pub const MAPPING_FILE: &str = "mapping.tsv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Wall-clock label; ignored by every digest and comparison.
    pub created: String,
    /// Relative path → SHA-256 of every archived file.
    pub files: BTreeMap<String, String>,
    pub mapping_digest: String,
    pub master_seed: u64,
    pub repetitions: u32,
    pub spec_digest: String,
    pub tool_version: String,
    pub trace_digests: Vec<String>,
}

impl Manifest {
    /// Key-sorted compact JSON.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("manifest serializes");
        serde_json::to_string(&value).expect("json values always serialize")
    }

    /// SHA-256 of the canonical manifest without its creation label.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("manifest serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("created");
        }
        sha256_hex(
            serde_json::to_string(&value)
                .expect("json values always serialize")
                .as_bytes(),
        )
    }
}

/// A metric summary as stored in `result.json`: decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredSummary {
    pub metric: String,
    pub count: u64,
    pub min: String,
    pub max: String,
    pub mean: String,
    pub p50: String,
    pub p95: String,
    pub p99: String,
}

impl From<&MetricSummary> for StoredSummary {
    fn from(s: &MetricSummary) -> Self {
        let d = |v| format_decimal(v, DECIMAL_DIGITS);
        Self {
            metric: s.metric.to_string(),
            count: s.count,
            min: d(&s.min),
            max: d(&s.max),
            mean: d(&s.mean),
            p50: d(&s.p50),
            p95: d(&s.p95),
            p99: d(&s.p99),
        }
    }
}

impl StoredSummary {
    pub fn to_summary(&self) -> Option<MetricSummary> {
        let r = |s: &str| parse_rational(s).ok();
        Some(MetricSummary {
            metric: self.metric.parse::<Metric>().ok()?,
            count: self.count,
            min: r(&self.min)?,
            max: r(&self.max)?,
            mean: r(&self.mean)?,
            p50: r(&self.p50)?,
            p95: r(&self.p95)?,
            p99: r(&self.p99)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepetitionResult {
    pub repetition_index: u32,
    pub trace_digest: String,
    pub completed_records: u64,
    pub dropped: u64,
    pub horizon_ns: u64,
    pub metrics_file: String,
    pub summaries: Vec<StoredSummary>,
}

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("CorruptArchive({path}): {reason}")]
    Corrupt { path: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn corrupt(path: &str, reason: impl Into<String>) -> ArchiveError {
    ArchiveError::Corrupt {
        path: path.to_string(),
        reason: reason.into(),
    }
}

/// A complete, verified archive.
#[derive(Debug, Clone)]
pub struct ExperimentArchive {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub results: Vec<RepetitionResult>,
    /// Raw samples per repetition: exact when freshly run, decimal-rounded
    /// when loaded from disk.
    pub samples: Vec<Vec<MetricSample>>,
}

impl ExperimentArchive {
    /// SHA-256 of the manifest without its creation label.
    pub fn manifest_digest(&self) -> String {
        self.manifest.digest()
    }

    /// All samples of all repetitions.
    pub fn all_samples(&self) -> impl Iterator<Item = &MetricSample> {
        self.samples.iter().flatten()
    }

    pub fn total_completed(&self) -> u64 {
        self.results.iter().map(|r| r.completed_records).sum()
    }

    /// Reads and verifies an archive: every file listed in the manifest must
    /// exist and hash to its recorded digest, and the recorded digests must
    /// agree with each other.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ArchiveError> {
        let dir = dir.as_ref().to_path_buf();
        let read = |rel: &str| -> Result<Vec<u8>, ArchiveError> {
            fs::read(dir.join(rel)).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => corrupt(rel, "missing file"),
                _ => ArchiveError::Io {
                    path: dir.join(rel).display().to_string(),
                    source: e,
                },
            })
        };
        let raw = read(MANIFEST_FILE)?;
        let manifest: Manifest =
            serde_json::from_slice(&raw).map_err(|e| corrupt(MANIFEST_FILE, format!("unreadable manifest: {e}")))?;

        let mut contents = BTreeMap::new();
        for (rel, digest) in &manifest.files {
            let bytes = read(rel)?;
            if sha256_hex(&bytes) != *digest {
                return Err(corrupt(rel, "digest mismatch"));
            }
            contents.insert(rel.as_str(), bytes);
        }
        let listed = |rel: &str| contents.get(rel).ok_or_else(|| corrupt(rel, "not listed in manifest"));

        if sha256_hex(listed(SPEC_FILE)?) != manifest.spec_digest {
            return Err(corrupt(SPEC_FILE, "spec digest does not match manifest.spec_digest"));
        }
        if sha256_hex(listed(MAPPING_FILE)?) != manifest.mapping_digest {
            return Err(corrupt(
                MAPPING_FILE,
                "mapping digest does not match manifest.mapping_digest",
            ));
        }
        if manifest.trace_digests.len() != manifest.repetitions as usize {
            return Err(corrupt(MANIFEST_FILE, "trace digest count differs from repetitions"));
        }

        let mut results = Vec::new();
        let mut samples = Vec::new();
        for (k, expected_trace) in manifest.trace_digests.iter().enumerate() {
            let result_path = format!("rep_{k}/result.json");
            let result: RepetitionResult = serde_json::from_slice(listed(&result_path)?)
                .map_err(|e| corrupt(&result_path, format!("unreadable result: {e}")))?;
            if result.repetition_index as usize != k || result.trace_digest != *expected_trace {
                return Err(corrupt(&result_path, "result disagrees with manifest"));
            }
            let metrics_path = format!("rep_{k}/{}", result.metrics_file);
            let text = std::str::from_utf8(listed(&metrics_path)?).map_err(|_| corrupt(&metrics_path, "not utf-8"))?;
            samples.push(from_csv(text).map_err(|e| corrupt(&metrics_path, e.to_string()))?);
            let trace_path = format!("rep_{k}/trace.log");
            if let Some(trace) = contents.get(trace_path.as_str()) {
                if sha256_hex(trace) != *expected_trace {
                    return Err(corrupt(&trace_path, "trace does not hash to the recorded trace digest"));
                }
            }
            results.push(result);
        }
        Ok(Self {
            dir,
            manifest,
            results,
            samples,
        })
    }
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8], files: &mut BTreeMap<String, String>) -> Result<(), RunError> {
    let path = dir.join(rel);
    let io = |source| RunError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(&path, bytes).map_err(io)?;
    files.insert(rel.to_string(), sha256_hex(bytes));
    Ok(())
}

/// Writes outcomes to `out_dir` in repetition order, manifest last.
pub fn write_archive(
    spec: &ExperimentSpec,
    mapping: &Mapping,
    outcomes: Vec<RepetitionOutcome>,
    out_dir: &Path,
    options: &RunOptions,
) -> Result<ExperimentArchive, RunError> {
    let mut files = BTreeMap::new();
    write_file(out_dir, SPEC_FILE, canonical_string(spec).as_bytes(), &mut files)?;
    write_file(out_dir, MAPPING_FILE, mapping.to_tsv().as_bytes(), &mut files)?;
    let mut results = Vec::with_capacity(outcomes.len());
    let mut samples = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let k = outcome.repetition_index;
        write_file(
            out_dir,
            &format!("rep_{k}/metrics.csv"),
            to_csv(&outcome.samples).as_bytes(),
            &mut files,
        )?;
        if let Some(trace) = &outcome.trace {
            write_file(out_dir, &format!("rep_{k}/trace.log"), trace, &mut files)?;
        }
        let result = RepetitionResult {
            repetition_index: k,
            trace_digest: outcome.trace_digest.clone(),
            completed_records: outcome.counters.completed_records,
            dropped: outcome.counters.dropped,
            horizon_ns: outcome.horizon_ns,
            metrics_file: "metrics.csv".into(),
            summaries: summarize_all(&outcome.samples)
                .iter()
                .map(StoredSummary::from)
                .collect(),
        };
        let json = serde_json::to_value(&result).expect("result serializes");
        let mut text = serde_json::to_string_pretty(&json).expect("json values always serialize");
        text.push('\n');
        write_file(out_dir, &format!("rep_{k}/result.json"), text.as_bytes(), &mut files)?;
        results.push(result);
        samples.push(outcome.samples);
    }
    let manifest = Manifest {
        created: options
            .created_label
            .clone()
            .unwrap_or_else(|| chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()),
        files,
        mapping_digest: mapping.digest(),
        master_seed: spec.master_seed,
        repetitions: spec.repetitions,
        spec_digest: canonical_digest(spec),
        tool_version: TOOL_VERSION.to_string(),
        trace_digests: results.iter().map(|r| r.trace_digest.clone()).collect(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_canonical_json()).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(ExperimentArchive {
        dir: out_dir.to_path_buf(),
        manifest,
        results,
        samples,
    })
}

/// Validates, maps, runs every repetition and writes the archive.
pub fn run_experiment(
    spec: &ExperimentSpec,
    pool: &HostPool,
    out_dir: impl AsRef<Path>,
) -> Result<ExperimentArchive, RunError> {
    run_experiment_with(
        spec,
        pool,
        out_dir,
        &RunOptions::default(),
        &BehaviorRegistry::builtin(),
    )
}

pub fn run_experiment_with(
    spec: &ExperimentSpec,
    pool: &HostPool,
    out_dir: impl AsRef<Path>,
    options: &RunOptions,
    registry: &BehaviorRegistry,
) -> Result<ExperimentArchive, RunError> {
    let mapping = prepare(spec, pool, options, registry)?;
    let outcomes = execute(spec, &mapping, options, registry)?;
    write_archive(spec, &mapping, outcomes, out_dir.as_ref(), options)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Repeatability {
    Identical,
    Divergent(Vec<String>),
}

/// Compares the reproducibility-relevant digests of two verified archives.
/// Differing field paths are returned sorted; when every repetition's trace
/// differs they collapse into `repetitions[*].trace_digest`.
pub fn verify_repeatability(a: &ExperimentArchive, b: &ExperimentArchive) -> Repeatability {
    let (ma, mb) = (&a.manifest, &b.manifest);
    let mut paths = Vec::new();
    if ma.mapping_digest != mb.mapping_digest {
        paths.push("manifest.mapping_digest".to_string());
    }
    if ma.master_seed != mb.master_seed {
        paths.push("manifest.master_seed".to_string());
    }
    if ma.repetitions != mb.repetitions {
        paths.push("manifest.repetitions".to_string());
    }
    if ma.spec_digest != mb.spec_digest {
        paths.push("manifest.spec_digest".to_string());
    }
    let n = ma.trace_digests.len().max(mb.trace_digests.len());
    let differing: Vec<usize> = (0..n)
        .filter(|&k| ma.trace_digests.get(k) != mb.trace_digests.get(k))
        .collect();
    if !differing.is_empty() && differing.len() == n {
        paths.push("repetitions[*].trace_digest".to_string());
    } else {
        paths.extend(differing.iter().map(|k| format!("repetitions[{k}].trace_digest")));
    }
    if paths.is_empty() {
        Repeatability::Identical
    } else {
        Repeatability::Divergent(paths)
    }
}
