use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meshembed::io::{read_obj, write_embeddings, write_obj, EmbeddingFile};
use meshembed::mesh::same_faces;
use meshembed::{shapes, Dims, PolygonMesh, VertexEmbeddings};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshembed")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn save(dir: &Path, name: &str, mesh: &PolygonMesh) -> PathBuf {
    let path = dir.join(name);
    write_obj(mesh, &path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_then_extract_tetrahedron() {
    let dir = tempfile::tempdir().unwrap();
    let input = save(dir.path(), "tetra.obj", &shapes::tetrahedron());
    let emb = dir.path().join("tetra.semb");
    let out = run(&["fit", "--input", s(&input), "--output", s(&emb)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("adjacency_f1: 1\n"));
    assert!(stdout(&out).contains("perm_accuracy: 1\n"));
    let trace = std::fs::read_to_string(dir.path().join("tetra.trace.csv")).unwrap();
    assert!(trace.starts_with("iter,edge_loss,perm_loss,adjacency_f1,perm_accuracy,wall_ms\n"));

    let decoded = dir.path().join("decoded.obj");
    let out = run(&["extract", "--emb", s(&emb), "--output", s(&decoded)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("fallback_count: 0"));
    let mesh = read_obj(&decoded).unwrap();
    assert!(same_faces(&mesh.faces, &shapes::tetrahedron().faces));
}

#[test]
fn open_surface_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut mesh = shapes::tetrahedron();
    mesh.faces.truncate(1);
    let input = save(dir.path(), "open.obj", &mesh);
    let out = run(&["fit", "--input", s(&input), "--output", s(&dir.path().join("o.semb"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("open boundary"), "{}", stderr(&out));
}

#[test]
fn random_embeddings_decode_to_a_valid_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40;
    let emb = VertexEmbeddings::random(n, Dims::default(), 1.0, 4.0, &mut rng);
    let positions = shapes::octasphere(4).positions.into_iter().take(n).collect();
    let path = dir.path().join("random.semb");
    write_embeddings(&EmbeddingFile::new(emb, positions), &path).unwrap();
    let obj = dir.path().join("random.obj");
    let out = run(&["extract", "--emb", s(&path), "--output", s(&obj)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for key in ["fallback_count:", "degenerate_orbits:", "isolated_vertices:"] {
        assert!(stdout(&out).contains(key));
    }
    let mesh = read_obj(&obj).unwrap();
    assert_eq!(mesh.vertex_count(), n);
    // Faces may be degenerate, but every directed edge must occur exactly
    // once and be matched by its reverse.
    let mut directed = std::collections::BTreeMap::new();
    for f in &mesh.faces {
        for k in 0..f.len() {
            *directed.entry((f[k], f[(k + 1) % f.len()])).or_insert(0) += 1;
        }
    }
    for (&(a, b), &count) in &directed {
        assert_eq!(count, 1);
        assert_eq!(directed.get(&(b, a)), Some(&1));
    }
}

#[test]
fn corrupted_embedding_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.semb");
    std::fs::write(&path, "{\"format_version\": 1, \"vertex_count\": 2}").unwrap();
    let out = run(&["extract", "--emb", s(&path), "--output", s(&dir.path().join("x.obj"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("schema"), "{}", stderr(&out));
    assert!(!dir.path().join("x.obj").exists());
}

#[test]
fn roundtrips_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for (name, mesh) in [
        ("tetra.obj", shapes::tetrahedron()),
        ("ico.obj", shapes::icosahedron()),
        ("cube.obj", shapes::cube()),
    ] {
        let input = save(dir.path(), name, &mesh);
        let out = run(&["roundtrip", "--input", s(&input)]);
        assert_eq!(code(&out), 0, "{name}: {}{}", stdout(&out), stderr(&out));
        assert!(stdout(&out).contains("faces_match: true"));
        assert!(stdout(&out).contains("wall_seconds:"));
    }
}

#[test]
fn starved_euclidean_fit_does_not_converge() {
    let dir = tempfile::tempdir().unwrap();
    let input = save(dir.path(), "slab.obj", &shapes::wavy_slab(30));
    let emb = dir.path().join("slab.semb");
    let out = run(&["fit", "--input", s(&input), "--output", s(&emb)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let out = run(&["fit", "--input", s(&input), "--output", s(&emb), "--distance", "squared_euclidean", "--max-iters", "20"]);
    assert_eq!(code(&out), 2, "{}", stdout(&out));
    assert!(stdout(&out).contains("converged: false"));
}

#[test]
fn validate_metrics_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cube = save(dir.path(), "cube.obj", &shapes::cube());

    let out = run(&["validate", "--input", s(&cube)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("valid: true\n"));

    let out = run(&["metrics", "--pred", s(&cube), "--gt", s(&cube), "--samples", "3000"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).starts_with("chamfer = 0\nf1 = 1\n"), "{}", stdout(&out));

    let hist = dir.path().join("h.csv");
    let out = run(&["stats", "--input", s(&cube), "--hist-out", s(&hist), "--bins", "18"]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&hist).unwrap();
    let angle_rows: Vec<&str> = text.lines().filter(|l| l.starts_with("corner_angle,")).collect();
    assert_eq!(angle_rows.len(), 18);
    for row in angle_rows {
        let f: Vec<&str> = row.split(',').collect();
        let expect = if f[2] == "90" { "24" } else { "0" };
        assert_eq!(f[4], expect, "{row}");
    }
}

#[test]
fn ablate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = save(dir.path(), "ico.obj", &shapes::icosahedron());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&["ablate", "--input", s(&input), "--budget", "40", "--out", s(path), "--seed", "5"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = stdout(&out);
        for mode in ["distance=spacetime", "distance=negative_dot", "reduction=add_sum"] {
            assert!(text.contains(mode), "{text}");
        }
    }
    let csv = std::fs::read(&a).unwrap();
    assert_eq!(csv, std::fs::read(&b).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("mode,iter,edge_loss,perm_loss,adjacency_f1,perm_accuracy\n"));
    let modes: std::collections::BTreeSet<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(modes.len(), 6);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&run(&["fit", "--bogus"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    let help = run(&["fit", "--help"]);
    assert_eq!(code(&help), 0);
    let text = stdout(&help);
    for flag in ["--lr", "--lambda", "--distance", "--reduction", "--seed", "--sinkhorn-iters", "[default: 0.1]"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
    let missing = run(&["validate", "--input", "/nonexistent/mesh.obj"]);
    assert_eq!(code(&missing), 1);
}
