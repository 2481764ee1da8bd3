use alloc::string::String;

use crate::dataset::FamilyTag;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("cannot normalize an all-zero vector")]
    ZeroVector,

    #[error("negative or non-finite component {value} at index {index}")]
    InvalidComponent { index: usize, value: f64 },

    #[error("no concepts survive filter (max observed detection frequency {max_frequency})")]
    NoConceptsSurvive { max_frequency: f64 },

    #[error("invalid emotion distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing {kind} label for id {id}")]
    MissingLabel { id: String, kind: &'static str },

    #[error("record {id} is missing feature family {family}")]
    MissingFamily { id: String, family: FamilyTag },

    #[error("duplicate record id {0}")]
    DuplicateId(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("classification needs both classes present")]
    SingleClass,

    #[error("class {0} has no members in the training data")]
    ClassAbsent(usize),
}
