//! PlantUML codec for architecture models.
//!
//! [`emit_atomic`] and [`emit_composed`] write a fixed dialect (see
//! `docs/dialect.md`); [`parse_puml`] reads it back, along with hand-written
//! diagrams in the same dialect. [`canonicalize`] reduces a model to the
//! element set used for scoring.

mod canonical;
mod emit;
mod parse;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::interfaces::TypeEntry;
use crate::model::Model;

pub use canonical::{canonicalize, canonicalize_with, CanonicalElement, CanonicalElementSet, CanonicalOptions, ElementClass, Level};
pub use emit::{emit_atomic, emit_composed, emit_model, with_header};
pub use parse::{parse_puml, parse_puml_lenient};

/// Stereotypes understood by the parser.
pub const KNOWN_STEREOTYPES: [&str; 10] = [
    "AtomicRosNodeClassifier",
    "ComposedRosNodeClassifier",
    "RosNodePart",
    "Namespace",
    "Publisher",
    "Subscriber",
    "ServiceProvided",
    "ServiceRequired",
    "Topic",
    "Service",
];

pub const TOPIC_STEREOTYPE: &str = "Topic";
pub const SERVICE_STEREOTYPE: &str = "Service";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct PumlError {
    pub line: usize,
    pub message: String,
}

impl PumlError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        PumlError {
            line,
            message: message.into(),
        }
    }
}

/// What lenient parsing tolerated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issue {
    UnknownStereotype { line: usize, stereotype: String },
    MalformedLabel { line: usize, label: String, expected: &'static str },
}

/// `'@key value` lines at the top of a diagram.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Header {
    pub lines: Vec<(String, String)>,
}

impl Header {
    pub fn get<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.lines.iter().filter(move |(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDiagram {
    pub model: Model,
    /// Legend entries, in file order.
    pub types: Vec<TypeEntry>,
    pub header: Header,
    pub issues: Vec<Issue>,
}

impl ParsedDiagram {
    pub fn level(&self) -> Level {
        match self.model {
            Model::Atomic(_) => Level::Atomic,
            Model::Composed(_) => Level::Composed,
        }
    }
}

/// Per-alias `key=value` annotations.
pub(crate) type Meta = BTreeMap<String, BTreeMap<String, String>>;
