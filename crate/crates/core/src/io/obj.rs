//! Wavefront OBJ polygon meshes: `v` and `f` records only.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::mesh::PolygonMesh;

use super::{read_text, write_bytes_atomic};

/// Statements that carry no connectivity or position data.
const IGNORED: &[&str] = &[
    "vt", "vn", "vp", "g", "o", "s", "usemtl", "mtllib", "l", "p", "mg", "lod", "shadow_obj", "trace_obj",
];

pub fn read_obj(path: &Path) -> Result<PolygonMesh> {
    parse_obj(&read_text(path)?, path)
}

/// Parses OBJ text; `origin` only labels errors.
pub fn parse_obj(text: &str, origin: &Path) -> Result<PolygonMesh> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut positions = Vec::new();
    // Face corners as (line, raw index, vertex count when the line was read).
    let mut raw_faces: Vec<(usize, Vec<i64>, usize)> = Vec::new();

    for (no, line) in text.lines().enumerate() {
        let line_no = no + 1;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(keyword) = tokens.next() else { continue };
        match keyword {
            "v" => {
                let values = tokens
                    .map(|t| t.parse::<f64>().map_err(|_| parse_err(line_no, format!("invalid coordinate `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                // x y z, optionally followed by w or by an rgb color.
                if !matches!(values.len(), 3 | 4 | 6) {
                    return Err(parse_err(line_no, format!("vertex has {} values, expected 3", values.len())));
                }
                if values[..3].iter().any(|v| !v.is_finite()) {
                    return Err(parse_err(line_no, "non-finite vertex coordinate".into()));
                }
                positions.push(Point3::new(values[0], values[1], values[2]));
            }
            "f" => {
                let corners = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        head.parse::<i64>().map_err(|_| parse_err(line_no, format!("invalid face corner `{t}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if corners.len() < 3 {
                    return Err(parse_err(line_no, format!("face has {} corners, expected at least 3", corners.len())));
                }
                raw_faces.push((line_no, corners, positions.len()));
            }
            k if IGNORED.contains(&k) => {}
            k => return Err(parse_err(line_no, format!("unsupported statement `{k}`"))),
        }
    }

    let n = positions.len();
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (line, corners, seen) in raw_faces {
        let face = corners
            .into_iter()
            .map(|idx| {
                let resolved = if idx < 0 { seen as i64 + idx } else { idx - 1 };
                if idx == 0 || resolved < 0 || resolved >= n as i64 {
                    Err(Error::IndexOutOfRange {
                        path: origin.to_path_buf(),
                        line,
                        index: idx,
                        vertex_count: n,
                    })
                } else {
                    Ok(resolved as u32)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        faces.push(face);
    }
    Ok(PolygonMesh::new(positions, faces))
}

/// OBJ text with shortest round-trip coordinates and 1-based faces.
pub fn render_obj(mesh: &PolygonMesh) -> String {
    let mut s = String::new();
    for p in &mesh.positions {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
    }
    for face in &mesh.faces {
        s.push('f');
        for &v in face {
            let _ = write!(s, " {}", v + 1);
        }
        s.push('\n');
    }
    s
}

pub fn write_obj(mesh: &PolygonMesh, path: &Path) -> Result<()> {
    write_bytes_atomic(path, render_obj(mesh).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<PolygonMesh> {
        parse_obj(text, Path::new("test.obj"))
    }

    #[test]
    fn tetrahedron_text() {
        let text = "# tetra\nv 1 1 1\nv -1 1 -1\nv 1 -1 -1\nv -1 -1 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";
        let mesh = parse(text).unwrap();
        assert_eq!((mesh.vertex_count(), mesh.face_count()), (4, 4));
        assert_eq!(mesh, shapes::tetrahedron());
    }

    #[test]
    fn slash_forms_and_ignored_records() {
        let text = "mtllib x.mtl\no thing\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\ng grp\nusemtl m\ns off\n\
                    f 1/1/1 2/2/1 3/3/1\nf 1//1 2//1 3//1\nf 1/1 2/2 3/3 # trailing comment\n";
        let mesh = parse(text).unwrap();
        assert_eq!(mesh.faces, vec![vec![0, 1, 2]; 3]);
    }

    #[test]
    fn negative_indices_are_relative() {
        let mesh = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\nv 0 0 1\nf -4 -2 -1\n").unwrap();
        assert_eq!(mesh.faces, vec![vec![0, 1, 2], vec![0, 2, 3]]);
    }

    #[test]
    fn out_of_range_indices() {
        for face in ["f 0 1 2", "f 1 2 4", "f -4 1 2"] {
            let err = parse(&format!("v 0 0 0\nv 1 0 0\nv 0 1 0\n{face}\n")).unwrap_err();
            assert!(matches!(err, Error::IndexOutOfRange { line: 4, .. }), "{face}: {err}");
        }
    }

    #[test]
    fn malformed_lines_report_location() {
        let cases = [
            "v 0 0\n",
            "v 0 0 zero\n",
            "v 0 0 0 1 2\n",
            "v 0 0 0\nv 1 0 0\nf 1 2\n",
            "v 0 0 0\nf 1 x 2\n",
            "v 0 0 0\ncurv 1 2\n",
            "v 0 0 inf\n",
        ];
        for text in cases {
            match parse(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, text.lines().count(), "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn quads_and_isolated_vertices_survive() {
        let mut mesh = shapes::cube();
        mesh.positions.push(Point3::new(0.25, -3.5, 1e-300));
        let back = parse(&render_obj(&mesh)).unwrap();
        assert_eq!(back, mesh);
        assert!(render_obj(&mesh).contains("\nf 1 3 4 2\n"));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ico.obj");
        let mesh = shapes::icosahedron();
        write_obj(&mesh, &path).unwrap();
        assert_eq!(read_obj(&path).unwrap(), mesh);
        let first = std::fs::read(&path).unwrap();
        write_obj(&mesh, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    proptest! {
        #[test]
        fn coordinates_roundtrip_bit_exact(coords in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 9..60)) {
            let n = coords.len() / 3;
            let positions: Vec<_> = (0..n).map(|i| Point3::new(coords[3 * i], coords[3 * i + 1], coords[3 * i + 2])).collect();
            let faces = (0..n as u32 - 2).map(|i| vec![i, i + 1, i + 2]).collect();
            let mesh = PolygonMesh::new(positions, faces);
            let back = parse(&render_obj(&mesh)).unwrap();
            prop_assert_eq!(back.faces, mesh.faces.clone());
            for (a, b) in back.positions.iter().zip(&mesh.positions) {
                for k in 0..3 {
                    prop_assert_eq!(a[k].to_bits(), b[k].to_bits());
                }
            }
        }
    }
}
