use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {field}: {message}")]
    Parse {
        line: usize,
        field: &'static str,
        message: String,
    },

    #[error("line {line}: record {response_id:?} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        line: usize,
        response_id: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate record (model={model:?}, prompt={prompt:?}, response={response:?})")]
    DuplicateRecord {
        model: String,
        prompt: String,
        response: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("insufficient points for intra-class distances (need at least 2, got {0})")]
    InsufficientPoints(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate intra-class geometry: all points per class coincide")]
    DegenerateGeometry,

    #[error("degenerate class means: genuine and hallucinated means coincide")]
    DegenerateMeans,

    #[error("regularized scatter is not positive definite (lambda {lambda}, after escalation)")]
    NotPositiveDefinite { lambda: f64 },

    #[error("zero-variance data")]
    ZeroVariance,

    #[error("requested {requested} components but the data has rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("infeasible split for class {class}: {message}")]
    InfeasibleSplit { class: &'static str, message: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no feasible configuration: {0}")]
    NoFeasible(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),

    #[error("{path}: {source}")]
    Input {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("no collection survived filtering ({} groups, {} dropped)", .0.groups_total, .0.dropped_groups)]
    NoCollections(crate::data::FilterSummary),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::DimensionMismatch { .. } | Error::Dimension { .. } => "dimension",
            Error::DuplicateRecord { .. } => "duplicate_record",
            Error::InsufficientPoints(_) => "insufficient_points",
            Error::Empty(_) => "empty",
            Error::NonFinite(_) => "non_finite",
            Error::DegenerateGeometry => "degenerate_geometry",
            Error::DegenerateMeans => "degenerate_means",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::ZeroVariance => "zero_variance",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::InfeasibleSplit { .. } => "infeasible_split",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NoFeasible(_) => "no_feasible",
            Error::Io { .. } => "io",
            Error::Serde(_) => "serde",
            Error::Input { source, .. } => source.kind(),
            Error::NoCollections(_) => "no_collections",
        }
    }
}
