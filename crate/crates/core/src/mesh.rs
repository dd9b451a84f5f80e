//! Polygon and halfedge mesh connectivity.
//!
//! A [`HalfedgeMesh`] is a pair of permutations over directed face sides:
//! `twin` (an involution pairing the two sides of an edge) and `next` (whose
//! orbits are the faces). [`HalfedgeMesh::build`] constructs one from a closed,
//! consistently oriented [`PolygonMesh`]; [`HalfedgeMesh::validate`] checks the
//! structural invariants of any halfedge mesh, including ones assembled from
//! decoded embeddings.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::Point3;
use serde::Serialize;

use crate::error::{Error, Result};

/// Unordered vertex pair stored as `(min, max)`.
pub type Edge = (u32, u32);

/// Deduplicated set of undirected edges, iterated in lexicographic order.
pub type EdgeSet = BTreeSet<Edge>;

#[inline]
pub fn edge_key(a: u32, b: u32) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Vertex positions plus faces given as counter-clockwise cyclic vertex lists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolygonMesh {
    pub positions: Vec<Point3<f64>>,
    pub faces: Vec<Vec<u32>>,
}

impl PolygonMesh {
    pub fn new(positions: Vec<Point3<f64>>, faces: Vec<Vec<u32>>) -> Self {
        Self { positions, faces }
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Checks index ranges, face degree and repeated vertices.
    pub fn check_faces(&self) -> Result<()> {
        let n = self.positions.len();
        for (fi, face) in self.faces.iter().enumerate() {
            if face.len() < 3 {
                return Err(Error::DegenerateFace {
                    face: fi,
                    reason: "fewer than three vertices",
                });
            }
            for &v in face {
                if v as usize >= n {
                    return Err(Error::FaceIndexOutOfRange {
                        face: fi,
                        index: v,
                        vertex_count: n,
                    });
                }
            }
            let distinct: BTreeSet<u32> = face.iter().copied().collect();
            if distinct.len() != face.len() {
                return Err(Error::DegenerateFace {
                    face: fi,
                    reason: "repeated vertex",
                });
            }
        }
        Ok(())
    }

    /// Faces rotated to start at their lowest vertex index, then sorted.
    pub fn canonical_faces(&self) -> Vec<Vec<u32>> {
        canonical_face_set(&self.faces)
    }

    /// Uniformly scales and translates the mesh so that its longest
    /// bounding-box dimension spans `[-1, 1]`.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        if self.positions.is_empty() {
            return out;
        }
        let mut lo = self.positions[0];
        let mut hi = self.positions[0];
        for p in &self.positions {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        if extent <= 0.0 {
            return out;
        }
        let center = nalgebra::center(&lo, &hi);
        let scale = 2.0 / extent;
        for p in &mut out.positions {
            *p = Point3::from((*p - center) * scale);
        }
        out
    }
}

/// Rotates a cyclic face so its smallest vertex index comes first.
pub fn canonicalize_face(face: &[u32]) -> Vec<u32> {
    let Some(start) = face
        .iter()
        .enumerate()
        .min_by_key(|(_, v)| **v)
        .map(|(i, _)| i)
    else {
        return Vec::new();
    };
    face[start..].iter().chain(&face[..start]).copied().collect()
}

pub fn canonical_face_set(faces: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = faces.iter().map(|f| canonicalize_face(f)).collect();
    out.sort();
    out
}

/// Whether two face lists describe the same faces up to cyclic rotation of
/// each face and reordering of the list.
pub fn same_faces(a: &[Vec<u32>], b: &[Vec<u32>]) -> bool {
    a.len() == b.len() && canonical_face_set(a) == canonical_face_set(b)
}

/// Undirected edge set of a polygon mesh.
pub fn gt_edges(mesh: &PolygonMesh) -> EdgeSet {
    let mut edges = EdgeSet::new();
    for face in &mesh.faces {
        for (c, &u) in face.iter().enumerate() {
            let v = face[(c + 1) % face.len()];
            if u != v {
                edges.insert(edge_key(u, v));
            }
        }
    }
    edges
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Halfedge {
    pub src: u32,
    pub dst: u32,
    pub twin: u32,
    pub next: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HalfedgeMesh {
    halfedges: Vec<Halfedge>,
    vertex_count: usize,
}

impl HalfedgeMesh {
    /// Wraps raw halfedge records without checking them. Use
    /// [`HalfedgeMesh::validate`] to inspect the result.
    pub fn from_raw(vertex_count: usize, halfedges: Vec<Halfedge>) -> Self {
        Self {
            halfedges,
            vertex_count,
        }
    }

    /// Builds the halfedge structure of a closed, oriented polygon mesh.
    ///
    /// Halfedges are numbered face by face in corner order, so halfedge `h` of
    /// face `f` runs from corner `c` to corner `c + 1`.
    pub fn build(mesh: &PolygonMesh) -> Result<Self> {
        mesh.check_faces()?;
        let total: usize = mesh.faces.iter().map(Vec::len).sum();
        let mut halfedges = Vec::with_capacity(total);
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(total);

        for face in &mesh.faces {
            let base = halfedges.len() as u32;
            let n = face.len() as u32;
            for c in 0..n {
                let src = face[c as usize];
                let dst = face[((c + 1) % n) as usize];
                let h = base + c;
                if directed.insert((src, dst), h).is_some() {
                    return Err(Error::NonManifoldEdge(
                        src,
                        dst,
                        "directed edge used by more than one face",
                    ));
                }
                halfedges.push(Halfedge {
                    src,
                    dst,
                    twin: u32::MAX,
                    next: base + (c + 1) % n,
                });
            }
        }

        for h in 0..halfedges.len() {
            let Halfedge { src, dst, .. } = halfedges[h];
            match directed.get(&(dst, src)) {
                Some(&t) => halfedges[h].twin = t,
                None => return Err(Error::OpenBoundary(src, dst)),
            }
        }

        Ok(Self {
            halfedges,
            vertex_count: mesh.positions.len(),
        })
    }

    pub fn halfedges(&self) -> &[Halfedge] {
        &self.halfedges
    }

    pub fn halfedge_count(&self) -> usize {
        self.halfedges.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    #[inline]
    pub fn twin(&self, h: u32) -> u32 {
        self.halfedges[h as usize].twin
    }

    #[inline]
    pub fn next(&self, h: u32) -> u32 {
        self.halfedges[h as usize].next
    }

    #[inline]
    pub fn src(&self, h: u32) -> u32 {
        self.halfedges[h as usize].src
    }

    #[inline]
    pub fn dst(&self, h: u32) -> u32 {
        self.halfedges[h as usize].dst
    }

    /// The orbits of `next`, each as a list of halfedge indices starting at
    /// its lowest-index halfedge, in ascending order of that halfedge.
    ///
    /// If `next` is not a permutation a walk stops at the first halfedge that
    /// was already visited or out of range.
    pub fn orbits(&self) -> Vec<Vec<u32>> {
        let n = self.halfedges.len();
        let mut visited = vec![false; n];
        let mut orbits = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut orbit = Vec::new();
            let mut h = start;
            while h < n && !visited[h] {
                visited[h] = true;
                orbit.push(h as u32);
                h = self.halfedges[h].next as usize;
            }
            orbits.push(orbit);
        }
        orbits
    }

    /// Faces as the `src` sequences of the `next` orbits. Orbits shorter than
    /// three are emitted too; [`HalfedgeMesh::validate`] flags them.
    pub fn extract_faces(&self) -> Vec<Vec<u32>> {
        self.orbits()
            .into_iter()
            .map(|orbit| orbit.iter().map(|&h| self.src(h)).collect())
            .collect()
    }

    pub fn to_polygon_mesh(&self, positions: Vec<Point3<f64>>) -> PolygonMesh {
        PolygonMesh::new(positions, self.extract_faces())
    }

    /// Outgoing halfedges of every vertex, in ascending halfedge order.
    pub fn outgoing(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.vertex_count];
        for (h, he) in self.halfedges.iter().enumerate() {
            if let Some(list) = out.get_mut(he.src as usize) {
                list.push(h as u32);
            }
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        let n = self.halfedges.len();
        let hs = &self.halfedges;
        let in_range = |h: u32| (h as usize) < n;

        let vertices_in_range = hs
            .iter()
            .all(|he| (he.src as usize) < self.vertex_count && (he.dst as usize) < self.vertex_count);

        let is_twin_involution = hs.iter().enumerate().all(|(h, he)| {
            in_range(he.twin)
                && he.twin as usize != h
                && hs[he.twin as usize].twin as usize == h
                && hs[he.twin as usize].src == he.dst
                && hs[he.twin as usize].dst == he.src
        });

        let mut hit = vec![false; n];
        let mut is_next_permutation = true;
        for (h, he) in hs.iter().enumerate() {
            if !in_range(he.next) || he.next as usize == h || hit[he.next as usize] {
                is_next_permutation = false;
                break;
            }
            hit[he.next as usize] = true;
        }

        let is_next_consistent = hs
            .iter()
            .all(|he| in_range(he.next) && hs[he.next as usize].src == he.dst);

        let mut orbit_degree_histogram = BTreeMap::new();
        let mut degenerate_orbits = Vec::new();
        let mut repeated_vertex_faces = Vec::new();
        if is_next_permutation {
            for orbit in self.orbits() {
                *orbit_degree_histogram.entry(orbit.len()).or_insert(0) += 1;
                let verts: Vec<u32> = orbit.iter().map(|&h| self.src(h)).collect();
                if orbit.len() < 3 {
                    degenerate_orbits.push(verts);
                } else if verts.iter().collect::<BTreeSet<_>>().len() != verts.len() {
                    repeated_vertex_faces.push(verts);
                }
            }
        }

        let outgoing = self.outgoing();
        let isolated_vertices: Vec<u32> = outgoing
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_empty())
            .map(|(v, _)| v as u32)
            .collect();

        let vertex_umbrella_single_cycle = vertices_in_range
            && is_twin_involution
            && is_next_permutation
            && is_next_consistent
            && outgoing.iter().all(|out| {
                let Some(&first) = out.first() else {
                    return true;
                };
                let mut h = first;
                let mut steps = 0;
                loop {
                    h = self.next(self.twin(h));
                    steps += 1;
                    if h == first || steps > out.len() {
                        break;
                    }
                }
                h == first && steps == out.len()
            });

        let mut directed = BTreeSet::new();
        let unique_directed = hs.iter().all(|he| directed.insert((he.src, he.dst)));
        let is_oriented_closed = vertices_in_range && is_twin_involution && unique_directed;

        ValidationReport {
            halfedge_count: n,
            vertex_count: self.vertex_count,
            is_twin_involution,
            is_next_permutation,
            is_next_consistent,
            orbit_degree_histogram,
            degenerate_orbits,
            repeated_vertex_faces,
            vertex_umbrella_single_cycle,
            is_oriented_closed,
            isolated_vertices,
        }
    }
}

/// Structural checks of a [`HalfedgeMesh`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub halfedge_count: usize,
    pub vertex_count: usize,
    /// `twin(twin(h)) = h`, `twin(h) != h` and twins have reversed endpoints.
    pub is_twin_involution: bool,
    /// `next` is a bijection without fixed points.
    pub is_next_permutation: bool,
    /// `dst(h) = src(next(h))` for every halfedge.
    pub is_next_consistent: bool,
    pub orbit_degree_histogram: BTreeMap<usize, usize>,
    /// Vertex sequences of orbits with fewer than three halfedges.
    pub degenerate_orbits: Vec<Vec<u32>>,
    /// Vertex sequences of orbits that visit some vertex twice.
    pub repeated_vertex_faces: Vec<Vec<u32>>,
    /// Rotating around each vertex with `next . twin` visits all of its
    /// outgoing halfedges in one cycle.
    pub vertex_umbrella_single_cycle: bool,
    pub is_oriented_closed: bool,
    /// Vertices without incident halfedges. Reported, not an error.
    pub isolated_vertices: Vec<u32>,
}

impl ValidationReport {
    /// The permutation-level invariants that hold for every assembled mesh,
    /// regardless of face degrees.
    pub fn is_manifold_structure(&self) -> bool {
        self.is_twin_involution
            && self.is_next_permutation
            && self.is_next_consistent
            && self.vertex_umbrella_single_cycle
            && self.is_oriented_closed
    }

    pub fn is_valid(&self) -> bool {
        self.is_manifold_structure()
            && self.degenerate_orbits.is_empty()
            && self.repeated_vertex_faces.is_empty()
    }

    /// Human-readable `key: value` rendering.
    pub fn to_text(&self) -> String {
        let hist: Vec<String> = self
            .orbit_degree_histogram
            .iter()
            .map(|(d, c)| format!("{d}:{c}"))
            .collect();
        format!(
            "valid: {}\nvertex_count: {}\nhalfedge_count: {}\nis_twin_involution: {}\n\
             is_next_permutation: {}\nis_next_consistent: {}\n\
             vertex_umbrella_single_cycle: {}\nis_oriented_closed: {}\n\
             orbit_degree_histogram: {}\ndegenerate_orbits: {}\nrepeated_vertex_faces: {}\n\
             isolated_vertices: {}\n",
            self.is_valid(),
            self.vertex_count,
            self.halfedge_count,
            self.is_twin_involution,
            self.is_next_permutation,
            self.is_next_consistent,
            self.vertex_umbrella_single_cycle,
            self.is_oriented_closed,
            hist.join(" "),
            self.degenerate_orbits.len(),
            self.repeated_vertex_faces.len(),
            self.isolated_vertices.len(),
        )
    }
}

/// Per-vertex cyclic ordering of neighbors.
///
/// `neighbors[i]` is sorted ascending and `next[i][r]` is the position in
/// `neighbors[i]` of `sigma_i(neighbors[i][r])`. The convention is
/// `sigma_i(j) = k` iff `next(h(j -> i)) = h(i -> k)`: entering `i` from `j`
/// within a face, the face leaves towards `k`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VertexPermutation {
    pub neighbors: Vec<Vec<u32>>,
    pub next: Vec<Vec<usize>>,
}

impl VertexPermutation {
    pub fn vertex_count(&self) -> usize {
        self.neighbors.len()
    }

    /// `sigma_i(j)`, if `j` is a neighbor of `i`.
    pub fn get(&self, i: u32, j: u32) -> Option<u32> {
        let nbrs = self.neighbors.get(i as usize)?;
        let r = nbrs.binary_search(&j).ok()?;
        Some(nbrs[self.next[i as usize][r]])
    }

    /// Total number of `(i, j)` entries.
    pub fn entry_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Ground-truth orderings read off a halfedge mesh. Fails if some vertex
    /// has more than one fan of faces.
    pub fn from_halfedge(he: &HalfedgeMesh) -> Result<Self> {
        let nv = he.vertex_count();
        let mut neighbors = vec![Vec::new(); nv];
        for h in he.halfedges() {
            neighbors[h.src as usize].push(h.dst);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        let mut next: Vec<Vec<usize>> = neighbors.iter().map(|n| vec![usize::MAX; n.len()]).collect();
        for h in he.halfedges() {
            // h = j -> i, next(h) = i -> k
            let (j, i) = (h.src, h.dst);
            let k = he.dst(h.next);
            let nbrs = &neighbors[i as usize];
            let (Ok(r), Ok(c)) = (nbrs.binary_search(&j), nbrs.binary_search(&k)) else {
                return Err(Error::InconsistentSigma(i));
            };
            next[i as usize][r] = c;
        }
        let perm = Self { neighbors, next };
        for i in 0..nv {
            if !is_single_cycle(&perm.next[i]) {
                return Err(Error::NonManifoldVertex(i as u32));
            }
        }
        Ok(perm)
    }

    /// Checks that every `next[i]` is a single cycle over the neighbors of `i`
    /// and that the neighbor sets match `edges`.
    pub fn check_against(&self, vertex_count: usize, edges: &EdgeSet) -> Result<()> {
        let expected = neighbor_lists(vertex_count, edges);
        if self.neighbors.len() != vertex_count || self.next.len() != vertex_count {
            return Err(Error::GraphMismatch);
        }
        for i in 0..vertex_count {
            if self.neighbors[i] != expected[i]
                || self.next[i].len() != expected[i].len()
                || !is_single_cycle(&self.next[i])
            {
                return Err(Error::InconsistentSigma(i as u32));
            }
        }
        Ok(())
    }
}

/// Sorted neighbor lists induced by an edge set.
pub fn neighbor_lists(vertex_count: usize, edges: &EdgeSet) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); vertex_count];
    for &(a, b) in edges {
        out[a as usize].push(b);
        out[b as usize].push(a);
    }
    for list in &mut out {
        list.sort_unstable();
    }
    out
}

/// True iff `perm` is a bijection on `0..perm.len()` consisting of exactly one
/// cycle. The empty and one-element permutations count as single cycles.
pub fn is_single_cycle(perm: &[usize]) -> bool {
    let d = perm.len();
    if d == 0 {
        return true;
    }
    let mut seen = vec![false; d];
    let mut r = 0;
    for _ in 0..d {
        if r >= d || seen[r] {
            return false;
        }
        seen[r] = true;
        r = perm[r];
    }
    r == 0
}
