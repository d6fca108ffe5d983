use std::path::PathBuf;

use crate::mesh::BoundaryTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh has no {0:?} boundary")]
    MissingTag(BoundaryTag),

    #[error("non-manifold edge ({0}, {1}) shared by {2} triangles")]
    NonManifoldEdge(usize, usize, usize),

    #[error("degenerate triangle {0} (zero area)")]
    DegenerateTriangle(usize),

    #[error("invalid mesh topology: {0}")]
    Topology(String),

    #[error("reversed triangle {triangle} after morph (signed area {area:e})")]
    ReversedTriangle { triangle: usize, area: f64 },

    #[error("outer boundary node moved by {0:e}")]
    OuterBoundaryMoved(f64),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("conflicting Dirichlet values for dof {dof}: {first} vs {second}")]
    ConflictingConstraint { dof: usize, first: f64, second: f64 },

    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),

    #[error("nonlinear solve failed at level {level}: residual {residual:e} after {iterations} iterations")]
    NonlinearDivergence {
        level: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("time level {level} out of range 0..={last}")]
    LevelOutOfRange { level: usize, last: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("morph retries exhausted at iteration {iteration} (last step {step:e})")]
    MorphExhausted { iteration: usize, step: f64 },

    #[error("optimizer iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips `AtIteration` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }
}
