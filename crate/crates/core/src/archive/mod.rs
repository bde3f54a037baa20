//! Full experiment cycle: repetitions, gathering and content-hashed archives.

mod runner;
mod store;

pub use runner::{execute, execute_workflow, prepare, run_repetition, RepetitionOutcome, RunError, RunOptions};
pub use store::{
    run_experiment, run_experiment_with, verify_repeatability, write_archive, ArchiveError, ExperimentArchive,
    Manifest, Repeatability, RepetitionResult, StoredSummary, MANIFEST_FILE, MAPPING_FILE, SPEC_FILE,
};
