use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. Each variant maps to exactly one
/// machine-readable code, see [`Error::code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed CSV at row {row}: {message}")]
    Parse { row: u64, message: String },

    #[error("input contains no data")]
    EmptyTable,

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("invalid scatterplot spec: {0}")]
    InvalidSpec(String),

    #[error("attribute `{attribute}` has {distinct} distinct values (max {max})")]
    Cardinality {
        attribute: String,
        distinct: usize,
        max: usize,
    },

    #[error("plot `{0}` has no points")]
    EmptyPlot(String),

    #[error("outlier clipping removed every point")]
    EmptyAfterClip,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot downsample a level at resolution {0}")]
    CannotDownsample(usize),

    #[error("incompatible heatmap levels: {0}")]
    IncompatibleLevel(String),

    #[error("incompatible pyramids: {0}")]
    IncompatiblePyramid(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("resolution {resolution} exceeds the exact transport cap of {cap}")]
    OracleScale { resolution: usize, cap: usize },

    #[error("transport is undefined for a zero distribution")]
    UndefinedDistribution,

    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },

    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("corrupt pyramid cache: {0}")]
    CacheFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse-error",
            Error::EmptyTable => "empty-table",
            Error::UnknownAttribute(_) => "unknown-attribute",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::Cardinality { .. } => "cardinality-error",
            Error::EmptyPlot(_) => "empty-plot",
            Error::EmptyAfterClip => "empty-after-clip",
            Error::InvalidConfig(_) => "invalid-config",
            Error::CannotDownsample(_) => "cannot-downsample",
            Error::IncompatibleLevel(_) => "incompatible-level",
            Error::IncompatiblePyramid(_) => "incompatible-pyramid",
            Error::InvalidRegion(_) => "invalid-region",
            Error::OracleScale { .. } => "oracle-scale",
            Error::UndefinedDistribution => "undefined-distribution",
            Error::NotFound { .. } => "not-found",
            Error::CapacityExceeded(_) => "capacity-exceeded",
            Error::InvalidRequest(_) => "invalid-request",
            Error::CacheFormat(_) => "cache-format",
            Error::Io(_) => "io-error",
            Error::Json(_) => "invalid-json",
        }
    }

    pub(crate) fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        Error::NotFound {
            kind,
            id: id.into(),
        }
    }
}
