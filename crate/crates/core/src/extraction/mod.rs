//! Decoding embeddings into a halfedge mesh.
//!
//! Edges come from thresholding pairwise distances. Around each vertex the
//! soft permutation over its decoded neighbors is rounded to a hard matching
//! that is forced to be a single cycle, and the matchings are stitched into
//! `next` pointers. The output is edge-manifold and oriented for any input
//! embeddings; only face degrees can be degenerate, and those are reported.

use nalgebra::{DMatrix, Point3};
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{decode_edges, DistanceMode, ReductionMode, SinkhornConfig, SoftPermutation, VertexEmbeddings};
use crate::error::{Error, Result};
use crate::mesh::{neighbor_lists, EdgeSet, Halfedge, HalfedgeMesh, PolygonMesh, VertexPermutation};

mod assignment;

pub use assignment::{greedy_single_cycle, is_single_cycle, solve_lap, AssignmentResult};

/// Rounds a soft permutation to a single-cycle matching: the exact
/// assignment on `-phi_bar` when it is already one cycle, the greedy
/// single-cycle matching otherwise.
pub fn match_neighborhood(soft: &SoftPermutation) -> AssignmentResult {
    let cost = -&soft.phi_bar;
    match_cost(&cost)
}

fn match_cost(cost: &DMatrix<f64>) -> AssignmentResult {
    // Sinkhorn output is finite, so the exact solver cannot fail here.
    let exact = solve_lap(cost).expect("finite cost matrix");
    if is_single_cycle(&exact.permutation) {
        exact
    } else {
        greedy_single_cycle(cost)
    }
}

/// Builds the halfedge mesh of `edges` with `next(h(j -> i)) = h(i -> sigma_i(j))`.
///
/// Halfedges `2e` and `2e + 1` are the two directions of the `e`-th edge in
/// `edges` order, lower vertex first.
pub fn assemble_mesh(
    positions: &[Point3<f64>],
    edges: &EdgeSet,
    sigma: &VertexPermutation,
) -> Result<(PolygonMesh, HalfedgeMesh)> {
    let nv = positions.len();
    if let Some(&(_, b)) = edges.iter().max_by_key(|e| e.1) {
        if b as usize >= nv {
            return Err(Error::GraphMismatch);
        }
    }
    let neighbors = neighbor_lists(nv, edges);
    if sigma.neighbors.len() != nv || sigma.next.len() != nv {
        return Err(Error::GraphMismatch);
    }

    let mut halfedges = Vec::with_capacity(2 * edges.len());
    // outgoing[i] lines up with neighbors[i]; edges come in lexicographic
    // order so each list fills in ascending neighbor order.
    let mut outgoing: Vec<Vec<u32>> = neighbors.iter().map(|n| Vec::with_capacity(n.len())).collect();
    for (e, &(a, b)) in edges.iter().enumerate() {
        let h = 2 * e as u32;
        halfedges.push(Halfedge { src: a, dst: b, twin: h + 1, next: u32::MAX });
        halfedges.push(Halfedge { src: b, dst: a, twin: h, next: u32::MAX });
        outgoing[a as usize].push(h);
        outgoing[b as usize].push(h + 1);
    }

    for i in 0..nv {
        let perm = &sigma.next[i];
        if sigma.neighbors[i] != neighbors[i] || perm.len() != neighbors[i].len() || !is_single_cycle(perm) {
            return Err(Error::InconsistentSigma(i as u32));
        }
        for (r, &h_out) in outgoing[i].iter().enumerate() {
            let incoming = halfedges[h_out as usize].twin;
            halfedges[incoming as usize].next = outgoing[i][perm[r]];
        }
    }

    let he = HalfedgeMesh::from_raw(nv, halfedges);
    let mesh = he.to_polygon_mesh(positions.to_vec());
    Ok((mesh, he))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExtractConfig {
    pub distance: DistanceMode,
    pub reduction: ReductionMode,
    pub sinkhorn: SinkhornConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExtractionStats {
    pub edge_count: usize,
    pub face_count: usize,
    /// Neighborhoods whose exact assignment was not a single cycle.
    pub fallback_count: usize,
    pub isolated_vertices: usize,
    /// Faces with fewer than three sides.
    pub degenerate_orbits: usize,
}

impl ExtractionStats {
    pub fn to_text(&self) -> String {
        format!(
            "edges: {}\nfaces: {}\nfallback_count: {}\nisolated_vertices: {}\ndegenerate_orbits: {}\n",
            self.edge_count, self.face_count, self.fallback_count, self.isolated_vertices, self.degenerate_orbits
        )
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub mesh: PolygonMesh,
    pub halfedge: HalfedgeMesh,
    pub edges: EdgeSet,
    pub sigma: VertexPermutation,
    pub stats: ExtractionStats,
}

/// Full decode: edges, per-vertex soft permutations, single-cycle matchings
/// and halfedge assembly.
pub fn extract(emb: &VertexEmbeddings, positions: &[Point3<f64>], config: &ExtractConfig) -> Result<Extraction> {
    emb.check()?;
    if positions.len() != emb.vertex_count {
        return Err(Error::DimensionMismatch {
            expected: emb.vertex_count,
            found: positions.len(),
        });
    }
    let edges = decode_edges(emb, config.distance);
    let neighbors = neighbor_lists(emb.vertex_count, &edges);

    let matchings: Vec<Result<AssignmentResult>> = neighbors
        .par_iter()
        .enumerate()
        .map(|(i, nbrs)| {
            if nbrs.is_empty() {
                return Ok(AssignmentResult { permutation: Vec::new(), cost: 0.0, used_fallback: false });
            }
            let soft = SoftPermutation::compute(emb, i, nbrs, config.reduction, &config.sinkhorn)?;
            Ok(match_neighborhood(&soft))
        })
        .collect();

    let mut next = Vec::with_capacity(emb.vertex_count);
    let mut fallback_count = 0;
    for m in matchings {
        let m = m?;
        fallback_count += m.used_fallback as usize;
        next.push(m.permutation);
    }
    let isolated_vertices = neighbors.iter().filter(|n| n.is_empty()).count();
    let sigma = VertexPermutation { neighbors, next };
    let (mesh, halfedge) = assemble_mesh(positions, &edges, &sigma)?;
    let degenerate_orbits = mesh.faces.iter().filter(|f| f.len() < 3).count();
    let stats = ExtractionStats {
        edge_count: edges.len(),
        face_count: mesh.faces.len(),
        fallback_count,
        isolated_vertices,
        degenerate_orbits,
    };
    Ok(Extraction { mesh, halfedge, edges, sigma, stats })
}
