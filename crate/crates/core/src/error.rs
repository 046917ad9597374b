use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ambiguous closest point for {point:?} (distance {dist:.3e}); the band is too wide for this geometry")]
    AmbiguousClosestPoint { point: [f64; 3], dist: f64 },

    #[error("mesh has no triangles")]
    EmptyMesh,

    #[error("triangle {face} has zero area")]
    DegenerateTriangle { face: usize },

    #[error("mesh is not watertight: edge ({0}, {1}) is shared by {2} faces")]
    NotWatertight(usize, usize, usize),

    #[error("mesh parse error on line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("band is not closed: {0}")]
    BandNotClosed(String),

    #[error("stencil node {index:?} is outside the band")]
    OutOfBand { index: [i32; 3] },

    #[error("node {node} is missing a finite-difference neighbour")]
    MissingNeighbour { node: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("diffusivity must be positive, found {value} at node {index}")]
    NonpositiveDiffusivity { index: usize, value: f64 },

    #[error("penalty strength must be non-negative, found {0}")]
    NegativePenalty(f64),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("non-finite value at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
