//! Procedural closed meshes used by tests, benchmarks and the CLI.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::{Point3, Vector3};

use crate::mesh::PolygonMesh;

pub fn tetrahedron() -> PolygonMesh {
    PolygonMesh::new(
        vec![
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(-1.0, 1.0, -1.0),
            Point3::new(1.0, -1.0, -1.0),
            Point3::new(-1.0, -1.0, 1.0),
        ],
        vec![vec![0, 2, 1], vec![0, 1, 3], vec![0, 3, 2], vec![1, 2, 3]],
    )
}

/// Unit cube `[0, 1]^3` with six quad faces. Vertex `i` sits at
/// `(i & 1, (i >> 1) & 1, (i >> 2) & 1)`.
pub fn cube() -> PolygonMesh {
    let positions = (0..8)
        .map(|i: u32| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    PolygonMesh::new(
        positions,
        vec![
            vec![0, 2, 3, 1],
            vec![4, 5, 7, 6],
            vec![0, 1, 5, 4],
            vec![2, 6, 7, 3],
            vec![0, 4, 6, 2],
            vec![1, 3, 7, 5],
        ],
    )
}

pub fn icosahedron() -> PolygonMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let positions = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .into_iter()
    .map(|(x, y, z)| Point3::new(x, y, z))
    .collect();
    let faces = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ]
    .into_iter()
    .map(|f| f.to_vec())
    .collect();
    PolygonMesh::new(positions, faces)
}

pub fn octahedron() -> PolygonMesh {
    octasphere(1)
}

/// Unit sphere built by splitting each octahedron face into `n * n`
/// triangles. Has `4 n^2 + 2` vertices; vertex degrees are 4 and 6.
pub fn octasphere(n: u32) -> PolygonMesh {
    assert!(n >= 1);
    let axes: [Vector3<i64>; 6] = [
        Vector3::new(1, 0, 0),
        Vector3::new(0, 1, 0),
        Vector3::new(0, 0, 1),
        Vector3::new(-1, 0, 0),
        Vector3::new(0, -1, 0),
        Vector3::new(0, 0, -1),
    ];
    // Octahedron faces (CCW from outside), as indices into `axes`.
    let octa = [
        [0, 1, 2],
        [1, 3, 2],
        [3, 4, 2],
        [4, 0, 2],
        [1, 0, 5],
        [3, 1, 5],
        [4, 3, 5],
        [0, 4, 5],
    ];
    let n = n as i64;
    let mut index: HashMap<[i64; 3], u32> = HashMap::new();
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut vertex = |key: Vector3<i64>, positions: &mut Vec<Point3<f64>>| -> u32 {
        *index.entry([key.x, key.y, key.z]).or_insert_with(|| {
            let p = key.cast::<f64>().normalize();
            positions.push(Point3::from(p));
            (positions.len() - 1) as u32
        })
    };
    for [a, b, c] in octa {
        let (a, b, c) = (axes[a], axes[b], axes[c]);
        let grid = |i: i64, j: i64| a * (n - i - j) + b * i + c * j;
        for i in 0..n {
            for j in 0..(n - i) {
                let p0 = vertex(grid(i, j), &mut positions);
                let p1 = vertex(grid(i + 1, j), &mut positions);
                let p2 = vertex(grid(i, j + 1), &mut positions);
                faces.push(vec![p0, p1, p2]);
                if i + j + 1 < n {
                    let p3 = vertex(grid(i + 1, j + 1), &mut positions);
                    faces.push(vec![p1, p3, p2]);
                }
            }
        }
    }
    PolygonMesh::new(positions, faces)
}

/// Triangulated torus with `rings` segments around the main axis and `sides`
/// segments around the tube. Vertex `(i, j)` has index `i * sides + j`.
pub fn torus(rings: u32, sides: u32, major: f64, minor: f64) -> PolygonMesh {
    assert!(rings >= 3 && sides >= 3);
    let mut positions = Vec::with_capacity((rings * sides) as usize);
    for i in 0..rings {
        let u = TAU * i as f64 / rings as f64;
        for j in 0..sides {
            let v = TAU * j as f64 / sides as f64;
            let w = major + minor * v.cos();
            positions.push(Point3::new(w * u.cos(), w * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: u32, j: u32| (i % rings) * sides + (j % sides);
    let mut faces = Vec::with_capacity((2 * rings * sides) as usize);
    for i in 0..rings {
        for j in 0..sides {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push(vec![a, b, c]);
            faces.push(vec![a, c, d]);
        }
    }
    PolygonMesh::new(positions, faces)
}

/// Thin extruded slab whose outline follows a sine wave, so the solid is
/// nonconvex. Each cap is triangulated as a zigzag strip across the outline,
/// giving the long, thin triangles typical of CAD exports. `samples` points
/// per outline side; `4 * samples` vertices in total.
pub fn wavy_slab(samples: u32) -> PolygonMesh {
    assert!(samples >= 2);
    let h = samples;
    let m = 2 * h;
    let (half_width, height) = (0.12, 0.2);
    let wave = |x: f64| 0.25 * (1.5 * std::f64::consts::PI * x).sin();
    let mut positions = Vec::with_capacity(2 * m as usize);
    for layer in 0..2 {
        let z = layer as f64 * height;
        // Lower side left to right, then upper side right to left: CCW.
        for i in 0..h {
            let x = -1.0 + 2.0 * i as f64 / (h - 1) as f64;
            positions.push(Point3::new(x, wave(x) - half_width, z));
        }
        for i in 0..h {
            let x = 1.0 - 2.0 * i as f64 / (h - 1) as f64;
            positions.push(Point3::new(x, wave(x) + half_width, z));
        }
    }
    let mut faces = Vec::with_capacity(4 * m as usize);
    for i in 0..m {
        let j = (i + 1) % m;
        faces.push(vec![i, j, m + j]);
        faces.push(vec![i, m + j, m + i]);
    }
    // Index `i` on the lower side sits across from `m - 1 - i` on the upper.
    let (mut lo, mut hi) = (0, m - 1);
    let mut advance_low = true;
    while hi > lo + 1 {
        let t = if advance_low { [lo, lo + 1, hi] } else { [lo, hi - 1, hi] };
        if advance_low {
            lo += 1;
        } else {
            hi -= 1;
        }
        advance_low = !advance_low;
        faces.push(vec![t[0], t[2], t[1]]);
        faces.push(vec![m + t[0], m + t[1], m + t[2]]);
    }
    PolygonMesh::new(positions, faces)
}

/// Signed enclosed volume of a closed mesh (fan-triangulated). Positive when
/// faces are oriented outward.
pub fn signed_volume(mesh: &PolygonMesh) -> f64 {
    let mut vol = 0.0;
    for f in &mesh.faces {
        let p0 = mesh.positions[f[0] as usize].coords;
        for w in f[1..].windows(2) {
            let p1 = mesh.positions[w[0] as usize].coords;
            let p2 = mesh.positions[w[1] as usize].coords;
            vol += p0.dot(&p1.cross(&p2)) / 6.0;
        }
    }
    vol
}
