use thiserror::Error;

/// Errors raised while building or validating geometries.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite coordinate ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("ring has {found} distinct vertices, at least 3 required")]
    RingTooShort { found: usize },
    #[error("exterior ring is self-intersecting")]
    SelfIntersecting,
    #[error("hole {index} is not strictly inside the exterior ring")]
    HoleOutside { index: usize },
    #[error("multipolygon parts {first} and {second} overlap")]
    OverlappingParts { first: usize, second: usize },
    #[error("multipolygon has no parts")]
    EmptyMultiPolygon,
    #[error("geometry set is empty")]
    EmptySet,
    #[error("duplicate site id `{0}`")]
    DuplicateId(String),
    #[error("site `{0}` is a point; adjacency is only defined for polygons")]
    PointInAdjacency(String),
}

/// A parse failure with the byte offset at which it was detected.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum GeoJsonError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected a FeatureCollection: {0}")]
    Structure(String),
    #[error("feature {index}: unsupported geometry `{kind}`")]
    UnsupportedGeometry { index: usize, kind: String },
    #[error("feature {index}: missing id property `{field}`")]
    MissingId { index: usize, field: String },
    #[error("feature {index}: {source}")]
    Geometry {
        index: usize,
        #[source]
        source: GeometryError,
    },
    #[error(transparent)]
    Set(GeometryError),
}

impl GeoJsonError {
    /// True when the failure comes from geometric validity rather than syntax.
    pub fn is_geometry(&self) -> bool {
        matches!(self, GeoJsonError::Geometry { .. } | GeoJsonError::Set(_))
            && !matches!(self, GeoJsonError::Set(GeometryError::DuplicateId(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovarianceError {
    #[error("distance must be finite and nonnegative, got {0}")]
    InvalidDistance(f64),
    #[error("practical range must be finite and positive, got {0}")]
    InvalidRange(f64),
    #[error("matrix not positive definite (minimum eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArealError {
    #[error("site `{0}` has no neighbours; its conditional distribution is undefined")]
    IsolatedNode(String),
    #[error("mixing parameter must lie in [0, 1], got {0}")]
    InvalidMixing(f64),
    #[error("precision must be positive, got {0}")]
    InvalidPrecision(f64),
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("site `{site}`: offset must be strictly positive, got {value}")]
    NonPositiveOffset { site: String, value: f64 },
    #[error("could not find a finite initial log-posterior after {attempts} attempts")]
    Initialization { attempts: usize },
    #[error("cannot derive the practical-range prior: {0}")]
    PhiPrior(String),
    #[error("{0}")]
    Diagnostics(String),
    #[error("fits were computed on different data (fingerprints {0} and {1})")]
    FingerprintMismatch(String, String),
    #[error("prediction is not supported for the `{0}` random effect; adjacency-based effects are undefined off the observed partition")]
    UnsupportedPrediction(String),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Areal(#[from] ArealError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("at least one Monte Carlo sample is required")]
    NoSamples,
    #[error("cannot sample uniformly from a geometry with zero area")]
    ZeroArea,
    #[error("a distance matrix needs at least two sites, got {0}")]
    TooFewSites(usize),
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
}
