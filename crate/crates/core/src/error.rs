use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("zero-length edge starting at vertex {0}")]
    DegenerateEdge(usize),
    #[error("vertices are ordered counterclockwise; clockwise order is required")]
    NotClockwise,
    #[error("vertex {0} is collinear with its neighbours")]
    Collinear(usize),
    #[error("polygon is not convex at vertex {0}")]
    NonConvex(usize),
    #[error("representation lists have mismatched lengths ({normals} normals, {offsets} offsets, {vertices} vertices)")]
    LengthMismatch {
        normals: usize,
        offsets: usize,
        vertices: usize,
    },
    #[error("normal {index} has norm {norm}, expected 1")]
    NonUnitNormal { index: usize, norm: f64 },
    #[error("vertex {vertex} violates halfspace {row} by {excess}")]
    VertexOutside { vertex: usize, row: usize, excess: f64 },
    #[error("halfspace {row} is tight at {count} vertices, expected exactly its two edge endpoints")]
    EdgeNotTight { row: usize, count: usize },
    #[error("three formation points are collinear")]
    CollinearFormation,
    #[error("support direction must be nonzero")]
    ZeroDirection,
    #[error("state has {got} entries, model expects {expected}")]
    StateDimension { expected: usize, got: usize },
    #[error("jacobian table does not match polygon: {0}")]
    JacobianMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("polygons overlap; the nearest-point direction is undefined")]
    Overlap,
    #[error("agent {agent}: barrier gradient vanished with an active constraint")]
    SingularGradient { agent: usize },
    #[error("constraint coefficient vanished with an active constraint")]
    DegenerateConstraint,
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),
    #[error("model assumption violated: {0}")]
    Model(String),
    #[error("shape file {path}: {message}")]
    ShapeFile { path: String, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("run aborted at step {step}: {source}")]
    Aborted { step: usize, source: Box<Error> },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
