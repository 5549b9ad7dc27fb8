use thiserror::Error;

use crate::operator::ScalarField;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("field mismatch: operator is {expected:?}, vector is {found:?}")]
    FieldMismatch {
        expected: ScalarField,
        found: ScalarField,
    },
    #[error("index {index} outside the operator domain: {reason}")]
    IndexDomainViolation { index: i64, reason: String },
    #[error("invariant violation ({which}): {reason}")]
    InvariantViolation { which: String, reason: String },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("operator is not power bounded: {0}")]
    NotPowerBounded(String),
    #[error("operator is already complex")]
    AlreadyComplex,
    #[error("operation requires a finite-dimensional operator")]
    NotFiniteDimensional,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("generator specs describe semigroups and cannot be iterated as a discrete operator")]
    GeneratorNotIterable,
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("compact net has no centers")]
    EmptyNet,
    #[error("scalar match against the zero vector")]
    ZeroDirection,
    #[error("supercyclicity candidate is the zero vector")]
    ZeroCandidate,
    #[error("lambda has modulus {0}, expected 1")]
    NotUnimodular(f64),
    #[error("operator is not an exact isometry")]
    NotIsometry,
    #[error(
        "no approximate kernel: smallest singular value {min_singular:e} exceeds {threshold:e}"
    )]
    NoApproximateKernel { min_singular: f64, threshold: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("semigroup is not bounded: {0}")]
    UnboundedSemigroup(String),
    #[error("subspace is not invariant: distance {distance:e} at t = {time}")]
    LNotInvariant { distance: f64, time: f64 },
    #[error("vector is not returning (min residual {min_residual:e})")]
    PreconditionNotReturning { min_residual: f64 },
    #[error("operator norm {norm} exceeds 1 under the active norm")]
    NotContraction { norm: f64 },
    #[error("lambda_k T^n_k a does not approach a (best residual {residual:e})")]
    HypothesisNotSatisfied { residual: f64 },
    #[error("extracted scalar has modulus {modulus}, expected 1")]
    ScalarNotUnimodular { modulus: f64 },
    #[error("only {found} returning witnesses recovered, need at least 3")]
    InsufficientWitnesses { found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl Error {
    pub(crate) fn invariant(which: &str, reason: impl Into<String>) -> Self {
        Error::InvariantViolation {
            which: which.to_string(),
            reason: reason.into(),
        }
    }
}
