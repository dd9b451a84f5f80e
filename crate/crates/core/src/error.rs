use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-manifold edge ({0}, {1}): {2}")]
    NonManifoldEdge(u32, u32, &'static str),

    #[error("open boundary at directed edge {0} -> {1}; only closed surfaces are supported")]
    OpenBoundary(u32, u32),

    #[error("degenerate face {face}: {reason}")]
    DegenerateFace { face: usize, reason: &'static str },

    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    FaceIndexOutOfRange {
        face: usize,
        index: u32,
        vertex_count: usize,
    },

    #[error("vertex {0} is not manifold: its incident faces form more than one fan")]
    NonManifoldVertex(u32),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("neighborhood ordering of vertex {0} does not match its neighbor set")]
    InconsistentSigma(u32),

    #[error("permutations are defined over different graphs")]
    GraphMismatch,

    #[error("surface has zero total area")]
    ZeroArea,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: face index {index} out of range for {vertex_count} vertices")]
    IndexOutOfRange {
        path: PathBuf,
        line: usize,
        index: i64,
        vertex_count: usize,
    },

    #[error("unsupported embedding file version {found} (expected {expected})")]
    VersionMismatch { found: i64, expected: i64 },

    #[error("embedding file schema error at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
