//! Per-vertex connectivity embeddings.
//!
//! Each vertex carries an adjacency vector `x` (space coordinates followed by
//! time coordinates) and three permutation feature vectors. Edges are the
//! vertex pairs whose pairwise distance falls strictly below a global
//! threshold `tau`; the cyclic ordering of a vertex's neighbors is read from a
//! Sinkhorn-normalized matrix of reduced permutation features.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::EdgeSet;

mod sinkhorn;

pub use sinkhorn::{row_argmax, sinkhorn, sinkhorn_log, SinkhornConfig};
pub(crate) use sinkhorn::{sinkhorn_backward, sinkhorn_forward};

/// Pairwise dissimilarity used to decode edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Squared distance of the space part minus squared distance of the time
    /// part. Not a metric and may be negative.
    #[default]
    Spacetime,
    SquaredEuclidean,
    NegativeDot,
}

impl DistanceMode {
    pub const ALL: [DistanceMode; 3] = [
        DistanceMode::Spacetime,
        DistanceMode::SquaredEuclidean,
        DistanceMode::NegativeDot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMode::Spacetime => "spacetime",
            DistanceMode::SquaredEuclidean => "squared_euclidean",
            DistanceMode::NegativeDot => "negative_dot",
        }
    }
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spacetime" | "st" => Ok(DistanceMode::Spacetime),
            "squared_euclidean" | "euclidean" | "eu" => Ok(DistanceMode::SquaredEuclidean),
            "negative_dot" | "dot" => Ok(DistanceMode::NegativeDot),
            other => Err(Error::Config(format!("unknown distance mode `{other}`"))),
        }
    }
}

/// Scalar reduction of a `(root, prev, next)` feature triplet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMode {
    /// `sum_c prev[c] * root[c] * next[c]`
    #[default]
    ProdSum,
    /// `sum_c max(prev[c], root[c], next[c])`
    MaxSum,
    /// `sum_c prev[c] + root[c] + next[c]`
    AddSum,
}

impl ReductionMode {
    pub const ALL: [ReductionMode; 3] = [
        ReductionMode::ProdSum,
        ReductionMode::MaxSum,
        ReductionMode::AddSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReductionMode::ProdSum => "prod_sum",
            ReductionMode::MaxSum => "max_sum",
            ReductionMode::AddSum => "add_sum",
        }
    }
}

impl fmt::Display for ReductionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReductionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prod_sum" | "prod" => Ok(ReductionMode::ProdSum),
            "max_sum" | "elementwise_max_sum" | "max" => Ok(ReductionMode::MaxSum),
            "add_sum" | "add" => Ok(ReductionMode::AddSum),
            other => Err(Error::Config(format!("unknown reduction mode `{other}`"))),
        }
    }
}

/// Embedding dimensions: `k_s` space and `k_t` time coordinates for the
/// adjacency vector, `k_p` for each permutation feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub k_s: usize,
    pub k_t: usize,
    pub k_p: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { k_s: 8, k_t: 8, k_p: 6 }
    }
}

impl Dims {
    /// Length of the adjacency vector.
    pub fn k(&self) -> usize {
        self.k_s + self.k_t
    }
}

/// Row-major per-vertex embeddings plus the global edge threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexEmbeddings {
    pub dims: Dims,
    pub vertex_count: usize,
    pub x: Vec<f64>,
    pub y_root: Vec<f64>,
    pub y_prev: Vec<f64>,
    pub y_next: Vec<f64>,
    pub tau: f64,
}

impl VertexEmbeddings {
    pub fn zeros(vertex_count: usize, dims: Dims, tau: f64) -> Self {
        let kp = vertex_count * dims.k_p;
        Self {
            dims,
            vertex_count,
            x: vec![0.0; vertex_count * dims.k()],
            y_root: vec![0.0; kp],
            y_prev: vec![0.0; kp],
            y_next: vec![0.0; kp],
            tau,
        }
    }

    /// I.i.d. `N(0, std^2)` entries. Draws `x` row by row, then `y_root`,
    /// `y_prev`, `y_next`.
    pub fn random<R: Rng + ?Sized>(
        vertex_count: usize,
        dims: Dims,
        std: f64,
        tau: f64,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, std).expect("standard deviation must be finite and >= 0");
        let mut emb = Self::zeros(vertex_count, dims, tau);
        for buf in [&mut emb.x, &mut emb.y_root, &mut emb.y_prev, &mut emb.y_next] {
            for v in buf.iter_mut() {
                *v = normal.sample(rng);
            }
        }
        emb
    }

    /// Checks dimensions, array lengths and finiteness.
    pub fn check(&self) -> Result<()> {
        if self.dims.k_s == 0 {
            return Err(Error::Config("k_s must be at least 1".into()));
        }
        let expect = |len: usize, want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: want,
                    found: len,
                })
            }
        };
        expect(self.x.len(), self.vertex_count * self.dims.k())?;
        for y in [&self.y_root, &self.y_prev, &self.y_next] {
            expect(y.len(), self.vertex_count * self.dims.k_p)?;
        }
        let finite = self
            .x
            .iter()
            .chain(&self.y_root)
            .chain(&self.y_prev)
            .chain(&self.y_next)
            .all(|v| v.is_finite())
            && self.tau.is_finite();
        if !finite {
            return Err(Error::NonFinite("embeddings"));
        }
        Ok(())
    }

    #[inline]
    pub fn x_row(&self, i: usize) -> &[f64] {
        let k = self.dims.k();
        &self.x[i * k..(i + 1) * k]
    }

    #[inline]
    pub fn root_row(&self, i: usize) -> &[f64] {
        let k = self.dims.k_p;
        &self.y_root[i * k..(i + 1) * k]
    }

    #[inline]
    pub fn prev_row(&self, i: usize) -> &[f64] {
        let k = self.dims.k_p;
        &self.y_prev[i * k..(i + 1) * k]
    }

    #[inline]
    pub fn next_row(&self, i: usize) -> &[f64] {
        let k = self.dims.k_p;
        &self.y_next[i * k..(i + 1) * k]
    }

    /// Number of scalars in the flat parameter layout.
    pub fn param_count(&self) -> usize {
        self.x.len() + 3 * self.y_root.len() + 1
    }

    /// Flat parameter vector `[x | y_root | y_prev | y_next | tau]`.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.x);
        p.extend_from_slice(&self.y_root);
        p.extend_from_slice(&self.y_prev);
        p.extend_from_slice(&self.y_next);
        p.push(self.tau);
        p
    }

    /// Inverse of [`VertexEmbeddings::to_params`].
    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let (x, rest) = params.split_at(self.x.len());
        let kp = self.y_root.len();
        self.x.copy_from_slice(x);
        self.y_root.copy_from_slice(&rest[..kp]);
        self.y_prev.copy_from_slice(&rest[kp..2 * kp]);
        self.y_next.copy_from_slice(&rest[2 * kp..3 * kp]);
        self.tau = rest[3 * kp];
    }
}

/// Pairwise distance between two adjacency vectors whose first `k_s`
/// entries are space coordinates.
pub fn pair_distance(a: &[f64], b: &[f64], k_s: usize, mode: DistanceMode) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if k_s > a.len() {
        return Err(Error::DimensionMismatch {
            expected: k_s,
            found: a.len(),
        });
    }
    Ok(distance(a, b, k_s, mode))
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64], k_s: usize, mode: DistanceMode) -> f64 {
    match mode {
        DistanceMode::Spacetime => {
            let (sa, ta) = a.split_at(k_s);
            let (sb, tb) = b.split_at(k_s);
            let space: f64 = sa.iter().zip(sb).map(|(p, q)| (p - q) * (p - q)).sum();
            let time: f64 = ta.iter().zip(tb).map(|(p, q)| (p - q) * (p - q)).sum();
            space - time
        }
        DistanceMode::SquaredEuclidean => a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum(),
        DistanceMode::NegativeDot => -a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>(),
    }
}

/// All pairs `{i, j}` with `d(x_i, x_j) < tau`.
pub fn decode_edges(emb: &VertexEmbeddings, mode: DistanceMode) -> EdgeSet {
    let mut edges = EdgeSet::new();
    let k_s = emb.dims.k_s;
    for i in 0..emb.vertex_count {
        let xi = emb.x_row(i);
        for j in (i + 1)..emb.vertex_count {
            if distance(xi, emb.x_row(j), k_s, mode) < emb.tau {
                edges.insert((i as u32, j as u32));
            }
        }
    }
    edges
}

/// Reduces a feature triplet to the scalar log-potential of a
/// `(prev, next)` neighbor pair around `root`.
pub fn reduce(root: &[f64], prev: &[f64], next: &[f64], mode: ReductionMode) -> Result<f64> {
    if prev.len() != root.len() || next.len() != root.len() {
        return Err(Error::DimensionMismatch {
            expected: root.len(),
            found: if prev.len() != root.len() { prev.len() } else { next.len() },
        });
    }
    Ok(reduce_unchecked(root, prev, next, mode))
}

#[inline]
pub(crate) fn reduce_unchecked(root: &[f64], prev: &[f64], next: &[f64], mode: ReductionMode) -> f64 {
    let it = root.iter().zip(prev).zip(next);
    match mode {
        ReductionMode::ProdSum => it.map(|((r, p), n)| p * r * n).sum(),
        ReductionMode::MaxSum => it.map(|((r, p), n)| p.max(*r).max(*n)).sum(),
        ReductionMode::AddSum => it.map(|((r, p), n)| p + r + n).sum(),
    }
}

/// Log-potential matrix around `center`: row `r` is the incoming neighbor
/// `neighbors[r]`, column `c` the outgoing neighbor `neighbors[c]`.
pub fn build_phi_log(
    emb: &VertexEmbeddings,
    center: usize,
    neighbors: &[u32],
    reduction: ReductionMode,
) -> DMatrix<f64> {
    let d = neighbors.len();
    let root = emb.root_row(center);
    DMatrix::from_fn(d, d, |r, c| {
        reduce_unchecked(
            root,
            emb.prev_row(neighbors[r] as usize),
            emb.next_row(neighbors[c] as usize),
            reduction,
        )
    })
}

/// Sinkhorn-normalized neighborhood matrix of one vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftPermutation {
    pub center: u32,
    pub neighbors: Vec<u32>,
    pub phi_bar: DMatrix<f64>,
}

impl SoftPermutation {
    pub fn compute(
        emb: &VertexEmbeddings,
        center: usize,
        neighbors: &[u32],
        reduction: ReductionMode,
        config: &SinkhornConfig,
    ) -> Result<Self> {
        let logits = build_phi_log(emb, center, neighbors, reduction);
        Ok(Self {
            center: center as u32,
            neighbors: neighbors.to_vec(),
            phi_bar: sinkhorn(&logits, config)?,
        })
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}
