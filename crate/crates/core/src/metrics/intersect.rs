//! Triangle-triangle intersection and mesh self-intersection counting.

use nalgebra::{Point3, Vector3};

use crate::mesh::PolygonMesh;

pub type Triangle = [Point3<f64>; 3];

/// Whether two closed triangles share at least one point. Degenerate
/// (zero-area) triangles never intersect anything.
pub fn triangles_intersect(a: &Triangle, b: &Triangle) -> bool {
    let na = (a[1] - a[0]).cross(&(a[2] - a[0]));
    let nb = (b[1] - b[0]).cross(&(b[2] - b[0]));
    if na.norm_squared() == 0.0 || nb.norm_squared() == 0.0 {
        return false;
    }
    let scale = a.iter().chain(b).map(|p| p.coords.amax()).fold(0.0, f64::max).max(1.0);
    let eps = 1e-12 * scale;

    let da = b.map(|p| plane_dist(a, &na, &p));
    let db = a.map(|p| plane_dist(b, &nb, &p));
    if same_strict_side(&da, eps) || same_strict_side(&db, eps) {
        return false;
    }
    if da.iter().all(|d| d.abs() <= eps) {
        return coplanar_overlap(a, b, &na);
    }
    // Non-coplanar: the intersection segment has each endpoint on the
    // boundary of one of the triangles, so some edge pierces the other.
    (0..3).any(|i| segment_hits(&a[i], &a[(i + 1) % 3], db[i], db[(i + 1) % 3], b, &nb, eps))
        || (0..3).any(|i| segment_hits(&b[i], &b[(i + 1) % 3], da[i], da[(i + 1) % 3], a, &na, eps))
}

fn plane_dist(t: &Triangle, n: &Vector3<f64>, p: &Point3<f64>) -> f64 {
    n.normalize().dot(&(p - t[0]))
}

fn same_strict_side(d: &[f64; 3], eps: f64) -> bool {
    d.iter().all(|&v| v > eps) || d.iter().all(|&v| v < -eps)
}

fn segment_hits(p: &Point3<f64>, q: &Point3<f64>, dp: f64, dq: f64, t: &Triangle, n: &Vector3<f64>, eps: f64) -> bool {
    if (dp > eps && dq > eps) || (dp < -eps && dq < -eps) {
        return false;
    }
    let x = if dp.abs() <= eps && dq.abs() <= eps {
        // Segment lies in the plane; only an endpoint can reach the
        // interior here, edge crossings are caught from the other side.
        return point_in_triangle(p, t, n, eps) || point_in_triangle(q, t, n, eps);
    } else if dp.abs() <= eps {
        *p
    } else if dq.abs() <= eps {
        *q
    } else {
        p + (q - p) * (dp / (dp - dq))
    };
    point_in_triangle(&x, t, n, eps)
}

fn point_in_triangle(x: &Point3<f64>, t: &Triangle, n: &Vector3<f64>, eps: f64) -> bool {
    let n = n.normalize();
    (0..3).all(|i| {
        let e = t[(i + 1) % 3] - t[i];
        e.cross(&(x - t[i])).dot(&n) >= -eps * e.norm()
    })
}

fn coplanar_overlap(a: &Triangle, b: &Triangle, n: &Vector3<f64>) -> bool {
    let drop = n.iamax();
    let (u, v) = ((drop + 1) % 3, (drop + 2) % 3);
    let pa = a.map(|p| [p[u], p[v]]);
    let pb = b.map(|p| [p[u], p[v]]);
    for i in 0..3 {
        for j in 0..3 {
            if segments_cross_2d(pa[i], pa[(i + 1) % 3], pb[j], pb[(j + 1) % 3]) {
                return true;
            }
        }
    }
    inside_2d(&pa, pb[0]) || inside_2d(&pb, pa[0])
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_cross_2d(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn inside_2d(t: &[[f64; 2]; 3], p: [f64; 2]) -> bool {
    let s = [orient(t[0], t[1], p), orient(t[1], t[2], p), orient(t[2], t[0], p)];
    s.iter().all(|&v| v >= 0.0) || s.iter().all(|&v| v <= 0.0)
}

struct FanTriangle {
    face: usize,
    verts: [u32; 3],
    lo: Point3<f64>,
    hi: Point3<f64>,
}

/// Percentage of faces (after fan triangulation) that intersect a
/// triangle they share no vertex with.
pub fn self_intersection_pct(mesh: &PolygonMesh) -> f64 {
    if mesh.faces.is_empty() {
        return 0.0;
    }
    let mut tris = Vec::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        for k in 1..face.len().saturating_sub(1) {
            let verts = [face[0], face[k], face[k + 1]];
            let p = verts.map(|v| mesh.positions[v as usize]);
            let lo = Point3::from(p[0].coords.inf(&p[1].coords).inf(&p[2].coords));
            let hi = Point3::from(p[0].coords.sup(&p[1].coords).sup(&p[2].coords));
            tris.push(FanTriangle { face: f, verts, lo, hi });
        }
    }
    tris.sort_by(|a, b| a.lo.x.total_cmp(&b.lo.x));

    let mut hit = vec![false; mesh.faces.len()];
    for i in 0..tris.len() {
        let a = &tris[i];
        for b in &tris[i + 1..] {
            if b.lo.x > a.hi.x {
                break;
            }
            if b.lo.y > a.hi.y || a.lo.y > b.hi.y || b.lo.z > a.hi.z || a.lo.z > b.hi.z {
                continue;
            }
            if a.verts.iter().any(|v| b.verts.contains(v)) {
                continue;
            }
            if hit[a.face] && hit[b.face] {
                continue;
            }
            let ta = a.verts.map(|v| mesh.positions[v as usize]);
            let tb = b.verts.map(|v| mesh.positions[v as usize]);
            if triangles_intersect(&ta, &tb) {
                hit[a.face] = true;
                hit[b.face] = true;
            }
        }
    }
    100.0 * hit.iter().filter(|&&h| h).count() as f64 / mesh.faces.len() as f64
}
