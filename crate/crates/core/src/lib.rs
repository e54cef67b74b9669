//! Gaussian-process models over arbitrary closed planar sets.
//!
//! Correlation between two sites is a Matérn function of the Hausdorff
//! distance between them, so points, polygons and mixtures of both share one
//! model. The crate also provides the neighbourhood-based baselines (scaled
//! ICAR, BYM2, Leroux), an adaptive Metropolis sampler for the Poisson and
//! Gaussian mixed models built on them, WAIC/HPD/ESS summaries, and
//! prediction onto new geometries.

pub mod arealbaselines;
pub mod covariance;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod metricspace;

pub use arealbaselines::{bym2_covariance, icar_structure, leroux_precision, IcarStructure};
pub use covariance::{
    chol_with_jitter, correlation_matrix, gp_loglik, rho, CorrelationModel, CovarianceSpec,
    Smoothness,
};
pub use error::{
    ArealError, CovarianceError, GeoJsonError, GeometryError, InferenceError, MetricError,
    ParseError,
};
pub use geometry::{AdjacencyMatrix, Geom, GeometrySet, Point, Polygon};
pub use inference::{
    fit, Likelihood, McmcSettings, ModelData, ModelSpec, PosteriorSamples, PriorSet, RandomEffect,
    SpatialInput,
};
pub use metricspace::{distance_matrix, hausdorff, DistanceKind, DistanceMatrix, DistanceOptions};
