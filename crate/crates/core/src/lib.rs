//! Continuous connectivity embeddings for closed, oriented polygon meshes.
//!
//! Every vertex carries an adjacency vector and three permutation feature
//! vectors. Edges are decoded by thresholding pairwise (spacetime) distances;
//! the cyclic order of each vertex's neighbors is decoded from a
//! Sinkhorn-normalized potential matrix rounded to a single-cycle matching.
//! The resulting `next`/`twin` pointers always form an edge-manifold,
//! oriented halfedge mesh, whatever the embedding values.
//!
//! - [`mesh`]: polygon and halfedge connectivity, validation.
//! - [`embedding`]: distances, edge decoding, potentials, Sinkhorn.
//! - [`extraction`]: assignment solvers and halfedge assembly.
//! - [`optim`]: losses, gradients, Adam and the fitting loop.
//! - [`metrics`]: connectivity and surface-quality measurements.
//! - [`io`]: OBJ meshes, embedding files, CSV output.

pub mod embedding;
pub mod error;
pub mod extraction;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod optim;
pub mod shapes;

pub use embedding::{
    build_phi_log, decode_edges, pair_distance, reduce, sinkhorn, Dims, DistanceMode, ReductionMode,
    SinkhornConfig, SoftPermutation, VertexEmbeddings,
};
pub use error::{Error, Result};
pub use extraction::{
    assemble_mesh, extract, greedy_single_cycle, is_single_cycle, match_neighborhood, solve_lap, AssignmentResult,
    ExtractConfig, Extraction, ExtractionStats,
};
pub use mesh::{gt_edges, Edge, EdgeSet, Halfedge, HalfedgeMesh, PolygonMesh, ValidationReport, VertexPermutation};
pub use optim::{fit, FitConfig, FitRecord, FitResult, FitTrace, Lambda};
