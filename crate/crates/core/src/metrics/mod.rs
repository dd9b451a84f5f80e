//! Connectivity accuracy, surface-sampling metrics and element statistics.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{gt_edges, EdgeSet, PolygonMesh, VertexPermutation};

mod intersect;
mod kdtree;

pub use intersect::{self_intersection_pct, triangles_intersect, Triangle};
pub use kdtree::KdTree;

/// F1 over unordered vertex pairs. Two empty sets score 1.
pub fn adjacency_f1(pred: &EdgeSet, gt: &EdgeSet) -> f64 {
    if pred.is_empty() && gt.is_empty() {
        return 1.0;
    }
    let tp = pred.intersection(gt).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / pred.len() as f64;
    let recall = tp / gt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Fraction of `(i, j)` entries with the same successor in both rotation
/// systems. Both must be defined over the same neighborhoods.
pub fn permutation_accuracy(pred: &VertexPermutation, gt: &VertexPermutation) -> Result<f64> {
    if pred.vertex_count() != gt.vertex_count() {
        return Err(Error::GraphMismatch);
    }
    let mut total = 0usize;
    let mut correct = 0usize;
    for i in 0..gt.vertex_count() {
        let mut a = pred.neighbors[i].clone();
        let mut b = gt.neighbors[i].clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::GraphMismatch);
        }
        for &j in &gt.neighbors[i] {
            total += 1;
            if pred.get(i as u32, j) == gt.get(i as u32, j) {
                correct += 1;
            }
        }
    }
    Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
}

/// Points drawn uniformly by area from a mesh surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSurface {
    pub points: Vec<Point3<f64>>,
    /// Unit normals of the source triangles.
    pub normals: Vec<Vector3<f64>>,
    pub faces: Vec<u32>,
}

impl SampledSurface {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn subset(&self, keep: &[usize]) -> Self {
        Self {
            points: keep.iter().map(|&i| self.points[i]).collect(),
            normals: keep.iter().map(|&i| self.normals[i]).collect(),
            faces: keep.iter().map(|&i| self.faces[i]).collect(),
        }
    }
}

/// Area-weighted uniform samples; polygons are fanned from their first
/// vertex.
pub fn sample_surface(mesh: &PolygonMesh, n: usize, seed: u64) -> Result<SampledSurface> {
    let mut tris = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0.0;
    for (f, face) in mesh.faces.iter().enumerate() {
        for k in 1..face.len().saturating_sub(1) {
            let p = [face[0], face[k], face[k + 1]].map(|v| mesh.positions[v as usize]);
            let cross = (p[1] - p[0]).cross(&(p[2] - p[0]));
            let area = 0.5 * cross.norm();
            if area > 0.0 && area.is_finite() {
                total += area;
                tris.push((f as u32, p, cross / (2.0 * area)));
                cumulative.push(total);
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SampledSurface {
        points: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        faces: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        let t = cumulative.partition_point(|&c| c <= target).min(tris.len() - 1);
        let (face, p, normal) = &tris[t];
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let point = p[0] + (p[1] - p[0]) * (s * (1.0 - r2)) + (p[2] - p[0]) * (s * r2);
        out.points.push(point);
        out.normals.push(*normal);
        out.faces.push(*face);
    }
    Ok(out)
}

/// Squared distance from every query point to its nearest neighbor in `tree`.
fn nearest_sq(tree: &KdTree<'_>, queries: &[Point3<f64>]) -> Vec<(usize, f64)> {
    queries.par_iter().map(|q| tree.nearest(q).expect("non-empty tree")).collect()
}

/// Symmetric mean squared nearest-neighbor distance and the F-score of the
/// fractions of points within `threshold` of the other cloud.
pub fn chamfer_f1(pred: &SampledSurface, gt: &SampledSurface, threshold: f64) -> Result<(f64, f64)> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let to_gt = nearest_sq(&KdTree::new(&gt.points), &pred.points);
    let to_pred = nearest_sq(&KdTree::new(&pred.points), &gt.points);
    let mean = |d: &[(usize, f64)]| d.iter().map(|x| x.1).sum::<f64>() / d.len() as f64;
    let cd = mean(&to_gt) + mean(&to_pred);

    let t2 = threshold * threshold;
    let within = |d: &[(usize, f64)]| d.iter().filter(|x| x.1 < t2).count() as f64 / d.len() as f64;
    let precision = within(&to_gt);
    let recall = within(&to_pred);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((cd, f1))
}

/// Indices of points whose mean normal agreement with their `k` nearest
/// neighbors is below `dot_threshold`.
pub fn edge_points(cloud: &SampledSurface, k: usize, dot_threshold: f64) -> Vec<usize> {
    let tree = KdTree::new(&cloud.points);
    let flags: Vec<bool> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let neigh: Vec<usize> =
                tree.knn(&cloud.points[i], k + 1).into_iter().map(|x| x.0).filter(|&j| j != i).take(k).collect();
            if neigh.is_empty() {
                return false;
            }
            let mean = neigh.iter().map(|&j| cloud.normals[i].dot(&cloud.normals[j])).sum::<f64>() / neigh.len() as f64;
            mean < dot_threshold
        })
        .collect();
    flags.iter().enumerate().filter(|x| *x.1).map(|x| x.0).collect()
}

/// Chamfer distance and F-score restricted to sharp-feature points.
///
/// Both edge sets empty gives `(0, 1)`; exactly one empty gives
/// `(inf, 0)`.
pub fn edge_metrics(
    pred: &SampledSurface,
    gt: &SampledSurface,
    k: usize,
    normal_dot_threshold: f64,
    threshold: f64,
) -> Result<(f64, f64)> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let pe = pred.subset(&edge_points(pred, k, normal_dot_threshold));
    let ge = gt.subset(&edge_points(gt, k, normal_dot_threshold));
    match (pe.is_empty(), ge.is_empty()) {
        (true, true) => Ok((0.0, 1.0)),
        (false, false) => chamfer_f1(&pe, &ge, threshold),
        _ => Ok((f64::INFINITY, 0.0)),
    }
}

/// Percent of predicted points whose normal deviates from the normal of
/// the nearest ground-truth point by more than `degrees`, ignoring sign.
pub fn inaccurate_normals(pred: &SampledSurface, gt: &SampledSurface, degrees: f64) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let nearest = nearest_sq(&KdTree::new(&gt.points), &pred.points);
    let bad = nearest
        .iter()
        .zip(&pred.normals)
        .filter(|((j, _), n)| {
            let c = n.dot(&gt.normals[*j]).abs().min(1.0);
            c.acos().to_degrees() > degrees
        })
        .count();
    Ok(100.0 * bad as f64 / pred.len() as f64)
}

/// Fixed-width histogram over `[lo, hi]`; values outside are clamped into
/// the end bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize, values: &[f64]) -> Self {
        let bins = bins.max(1);
        let mut counts = vec![0u64; bins];
        let width = hi - lo;
        for &v in values {
            let b = if width > 0.0 {
                (((v - lo) / width) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize
            } else {
                0
            };
            counts[b] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + w * bin as f64, self.lo + w * (bin + 1) as f64)
    }
}

/// Length of every unique edge, in edge-set order.
pub fn edge_lengths(mesh: &PolygonMesh) -> Vec<f64> {
    gt_edges(mesh)
        .iter()
        .map(|&(a, b)| (mesh.positions[a as usize] - mesh.positions[b as usize]).norm())
        .collect()
}

/// Interior angle in degrees at every face corner, face by face.
pub fn corner_angles(mesh: &PolygonMesh) -> Vec<f64> {
    let mut out = Vec::new();
    for face in &mesh.faces {
        let d = face.len();
        for k in 0..d {
            let p = mesh.positions[face[k] as usize];
            let a = mesh.positions[face[(k + d - 1) % d] as usize] - p;
            let b = mesh.positions[face[(k + 1) % d] as usize] - p;
            out.push(a.cross(&b).norm().atan2(a.dot(&b)).to_degrees());
        }
    }
    out
}

/// Edge-length histogram over `[0, longest edge]` and corner-angle
/// histogram over `[0, 180]` degrees.
pub fn element_stats(mesh: &PolygonMesh, bins: usize) -> (Histogram, Histogram) {
    let lengths = edge_lengths(mesh);
    let longest = lengths.iter().copied().fold(0.0, f64::max);
    (
        Histogram::new(0.0, longest, bins, &lengths),
        Histogram::new(0.0, 180.0, bins, &corner_angles(mesh)),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsConfig {
    pub samples: usize,
    pub seed: u64,
    /// Distance below which a point counts as matched.
    pub threshold: f64,
    pub edge_neighbors: usize,
    pub edge_dot_threshold: f64,
    pub normal_degrees: f64,
    pub bins: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
            threshold: 0.02,
            edge_neighbors: 10,
            edge_dot_threshold: 0.2,
            normal_degrees: 10.0,
            bins: 18,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub chamfer: f64,
    pub f1: f64,
    pub ecd: f64,
    pub ef1: f64,
    pub inaccurate_normals_pct: f64,
    pub self_intersection_pct: f64,
    pub vertex_count: usize,
    pub face_count: usize,
    pub edge_length_histogram: Histogram,
    pub corner_angle_histogram: Histogram,
}

const CSV_HEADER: [&str; 10] = [
    "chamfer",
    "f1",
    "ecd",
    "ef1",
    "inaccurate_normals_pct",
    "self_intersection_pct",
    "vertex_count",
    "face_count",
    "edge_length_histogram",
    "corner_angle_histogram",
];

fn join_counts(h: &Histogram) -> String {
    h.counts.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

impl MetricsReport {
    /// One `key = value` line per field; histograms as `lo..hi: count` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "chamfer = {}", self.chamfer);
        let _ = writeln!(s, "f1 = {}", self.f1);
        let _ = writeln!(s, "ecd = {}", self.ecd);
        let _ = writeln!(s, "ef1 = {}", self.ef1);
        let _ = writeln!(s, "inaccurate_normals_pct = {}", self.inaccurate_normals_pct);
        let _ = writeln!(s, "self_intersection_pct = {}", self.self_intersection_pct);
        let _ = writeln!(s, "vertex_count = {}", self.vertex_count);
        let _ = writeln!(s, "face_count = {}", self.face_count);
        for (name, h) in [
            ("edge_length_histogram", &self.edge_length_histogram),
            ("corner_angle_histogram", &self.corner_angle_histogram),
        ] {
            let _ = writeln!(s, "{name}:");
            for (b, c) in h.counts.iter().enumerate() {
                let (lo, hi) = h.bin_edges(b);
                let _ = writeln!(s, "  {lo:.6}..{hi:.6}: {c}");
            }
        }
        s
    }

    /// Writes a header and one row per report; histogram counts are
    /// `;`-joined.
    pub fn write_csv<W: Write>(reports: &[MetricsReport], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for r in reports {
            w.write_record([
                r.chamfer.to_string(),
                r.f1.to_string(),
                r.ecd.to_string(),
                r.ef1.to_string(),
                r.inaccurate_normals_pct.to_string(),
                r.self_intersection_pct.to_string(),
                r.vertex_count.to_string(),
                r.face_count.to_string(),
                join_counts(&r.edge_length_histogram),
                join_counts(&r.corner_angle_histogram),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compares `pred` against `gt` after normalizing each to the `[-1, 1]`
/// box. Both surfaces are sampled with the same seed, so identical meshes
/// score exactly. Element statistics and self-intersections describe `pred`.
pub fn evaluate(pred: &PolygonMesh, gt: &PolygonMesh, config: &MetricsConfig) -> Result<MetricsReport> {
    let pred = pred.normalized();
    let gt = gt.normalized();
    let ps = sample_surface(&pred, config.samples, config.seed)?;
    let gs = sample_surface(&gt, config.samples, config.seed)?;
    let (chamfer, f1) = chamfer_f1(&ps, &gs, config.threshold)?;
    let (ecd, ef1) = edge_metrics(&ps, &gs, config.edge_neighbors, config.edge_dot_threshold, config.threshold)?;
    let inaccurate_normals_pct = inaccurate_normals(&ps, &gs, config.normal_degrees)?;
    let (edge_length_histogram, corner_angle_histogram) = element_stats(&pred, config.bins);
    Ok(MetricsReport {
        chamfer,
        f1,
        ecd,
        ef1,
        inaccurate_normals_pct,
        self_intersection_pct: self_intersection_pct(&pred),
        vertex_count: pred.vertex_count(),
        face_count: pred.face_count(),
        edge_length_histogram,
        corner_angle_histogram,
    })
}
