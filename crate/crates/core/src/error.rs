use thiserror::Error;

use crate::surface::Slot;

/// Errors raised anywhere in the toolkit.
///
/// Every variant maps to a stable machine-readable code (see [`Error::code`]),
/// which the command-line front end reports verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("triangle {triangle}: edge vectors do not sum to zero")]
    EdgeSum { triangle: usize },
    #[error("triangle {triangle}: signed area is not positive")]
    NonPositiveArea { triangle: usize },
    #[error("gluing is not an involution at slot {slot}")]
    GluingNotInvolutive { slot: Slot },
    #[error("glued slots {a} and {b} do not carry opposite vectors")]
    GluingNotOpposite { a: Slot, b: Slot },
    #[error("cone angle at singularity {vertex} is not a positive multiple of 2π")]
    ConeAngle { vertex: usize },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("resource limit exceeded: {states} search states (limit {limit}) at radius² {radius_sq}")]
    ResourceLimit {
        states: usize,
        limit: usize,
        radius_sq: String,
    },
    #[error("points are collinear")]
    Collinear,
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("flip limit of {0} exceeded")]
    FlipLimit(usize),
    #[error("flip cycle detected after {0} flips")]
    FlipCycle(usize),
    #[error("triangulation is not locally Delaunay at slot {0}")]
    NotDelaunay(Slot),
    #[error("Chew construction failed: {0}")]
    ChewCase(String),
    #[error("length comparison undecided at maximum precision")]
    IntervalUndecided,
    #[error("saddle connection does not belong to this triangulation: {0}")]
    ConnectionMismatch(String),
    #[error("{ambiguous} of {total} memberships are ambiguous (tolerance {tolerance})")]
    AmbiguousMembership {
        ambiguous: usize,
        total: usize,
        tolerance: f64,
    },
    #[error("sandwich ordering violated: {0}")]
    MarginViolation(String),
    #[error("acceptance rate {rate:.4} below threshold {threshold}")]
    AcceptanceRate { rate: f64, threshold: f64 },
    #[error("sample {index}: {source}")]
    Sample { index: usize, source: Box<Error> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse(_) => "PARSE",
            Error::EdgeSum { .. } => "EDGE_SUM",
            Error::NonPositiveArea { .. } => "NONPOSITIVE_AREA",
            Error::GluingNotInvolutive { .. } => "GLUING_NOT_INVOLUTIVE",
            Error::GluingNotOpposite { .. } => "GLUING_NOT_OPPOSITE",
            Error::ConeAngle { .. } => "CONE_ANGLE",
            Error::IndexOutOfRange(_) => "INDEX_OUT_OF_RANGE",
            Error::SingularMatrix => "SINGULAR_MATRIX",
            Error::ResourceLimit { .. } => "RESOURCE_LIMIT",
            Error::Collinear => "COLLINEAR",
            Error::Degenerate(_) => "DEGENERATE",
            Error::FlipLimit(_) => "FLIP_LIMIT",
            Error::FlipCycle(_) => "FLIP_CYCLE",
            Error::NotDelaunay(_) => "NOT_DELAUNAY",
            Error::ChewCase(_) => "CHEW_CASE",
            Error::IntervalUndecided => "INTERVAL_UNDECIDED",
            Error::ConnectionMismatch(_) => "CONNECTION_MISMATCH",
            Error::AmbiguousMembership { .. } => "AMBIGUOUS_MEMBERSHIP",
            Error::MarginViolation(_) => "MARGIN_VIOLATION",
            Error::AcceptanceRate { .. } => "ACCEPTANCE_RATE",
            Error::Sample { source, .. } => source.code(),
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::Io(_) => "IO",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
