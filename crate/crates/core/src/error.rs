use thiserror::Error;

use crate::geometry::Cell2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("footprint column {0:?} has no cloud points")]
    EmptyColumn(Cell2),
    #[error("bottom height must be non-negative, got {0}")]
    NegativeHeight(f64),
    #[error("empty footprint")]
    EmptyFootprint,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("failed to read scene file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported scene version {0}")]
    UnsupportedVersion(u32),
    #[error("scene failed validation: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("infeasible generation config: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("empty feature map")]
    EmptyFeatureMap,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid robot model: {0}")]
    InvalidRobot(String),
    #[error("coverage target must be in (0, 1], got {0}")]
    CoverageTarget(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("no prompt template for level `{0}`")]
    MissingTemplate(String),
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("no recorded reply for prompt")]
    ReplayExhausted,
    #[error("knowledge base error: {0}")]
    KnowledgeBase(String),
    #[error("transcript I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("weights must be non-negative and sum to 1 (got {0:?})")]
    Weights([f64; 3]),
    #[error("tour has {0} waypoints; at most {max} supported, reduce per-feature pose counts", max = 10)]
    TourTooLarge(usize),
    #[error("{0}")]
    Report(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}
