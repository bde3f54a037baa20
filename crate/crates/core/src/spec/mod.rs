//! Declarative experiment specifications: model, parsing, validation and
//! canonical fingerprints.

pub mod canonical;
pub mod model;
pub mod parse;
pub mod units;
pub mod validate;

pub use canonical::{canonical_digest, canonical_string, sha256_hex};
pub use model::*;
pub use parse::{parse_space, parse_spec, to_yaml, SpecError};
pub use validate::{validate_spec, validate_spec_with, Violation, ViolationCode};
