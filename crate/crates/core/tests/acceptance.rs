//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per
//! criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use meshembed::mesh::same_faces;
use meshembed::metrics::{chamfer_f1, corner_angles, inaccurate_normals, sample_surface, self_intersection_pct, SampledSurface};
use meshembed::optim::{edge_loss_grad, finite_diff_check, initial_embeddings, perm_loss_grad, FitTarget};
use meshembed::{
    extract, fit, greedy_single_cycle, is_single_cycle, pair_distance, shapes, sinkhorn, solve_lap, Dims,
    DistanceMode, ExtractConfig, FitConfig, FitTrace, HalfedgeMesh, PolygonMesh, ReductionMode, SinkhornConfig,
    VertexEmbeddings,
};
use nalgebra::{DMatrix, Rotation3, Unit, Vector3};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fmt_iters(v: Option<usize>) -> String {
    v.map_or_else(|| "not reached".into(), |i| i.to_string())
}

/// `None` (never reached) compares as worse than any count.
fn rank(v: Option<usize>) -> usize {
    v.unwrap_or(usize::MAX)
}

fn roundtrip(mesh: &PolygonMesh, config: &FitConfig) -> (bool, usize, f64) {
    let start = Instant::now();
    let result = fit(mesh, config).expect("fit runs");
    let extract_config = ExtractConfig {
        distance: config.distance,
        reduction: config.reduction,
        sinkhorn: config.sinkhorn,
    };
    let out = extract(&result.embeddings, &mesh.positions, &extract_config).expect("extract runs");
    let seconds = start.elapsed().as_secs_f64();
    let target = FitTarget::from_mesh(mesh).unwrap();
    let ok = result.converged && out.edges == target.edges && same_faces(&out.mesh.faces, &mesh.faces);
    (ok, result.trace.records.len(), seconds)
}

fn roundtrip_exactness() -> Outcome {
    let config = FitConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, mesh) in [
        ("tetrahedron", shapes::tetrahedron()),
        ("cube", shapes::cube()),
        ("icosahedron", shapes::icosahedron()),
        ("sphere486", shapes::octasphere(11)),
    ] {
        let (exact, iters, seconds) = roundtrip(&mesh, &config);
        ok &= exact && iters <= 2000 && seconds <= 60.0;
        parts.push(format!("{name} exact={exact} iters={iters} {seconds:.2}s"));
    }
    check(ok, parts.join(", "))
}

fn scalability() -> Outcome {
    let mesh = shapes::torus(40, 50, 1.0, 0.35);
    let start = Instant::now();
    let result = fit(&mesh, &FitConfig::default()).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let last = result.trace.last().unwrap();
    check(
        last.adjacency_f1 >= 0.999 && last.perm_accuracy >= 0.999,
        format!(
            "V={} iters={} f1={} accuracy={} {seconds:.1}s",
            mesh.vertex_count(),
            result.trace.records.len(),
            last.adjacency_f1,
            last.perm_accuracy
        ),
    )
}

fn sweep<T: Copy>(mesh: &PolygonMesh, modes: &[T], apply: impl Fn(T) -> FitConfig) -> Vec<FitTrace> {
    modes.iter().map(|&m| fit(mesh, &apply(m)).unwrap().trace).collect()
}

fn distance_ablation() -> Outcome {
    let mesh = shapes::wavy_slab(125);
    let modes = [DistanceMode::Spacetime, DistanceMode::SquaredEuclidean, DistanceMode::NegativeDot];
    let traces = sweep(&mesh, &modes, |distance| FitConfig {
        distance,
        ..FitConfig::default()
    });
    let iters: Vec<Option<usize>> = traces.iter().map(|t| t.iters_to_f1(0.99)).collect();
    let st = rank(iters[0]);
    let ok = iters[0].is_some()
        && iters[1..].iter().all(|&v| match v {
            None => true,
            Some(i) => i > st && i as f64 > 3.0 * st as f64,
        });
    check(
        ok,
        format!(
            "iters to F1>=0.99: spacetime={} squared_euclidean={} negative_dot={}",
            fmt_iters(iters[0]),
            fmt_iters(iters[1]),
            fmt_iters(iters[2])
        ),
    )
}

fn reduction_ablation() -> Outcome {
    let mesh = shapes::wavy_slab(125);
    let modes = [ReductionMode::ProdSum, ReductionMode::MaxSum, ReductionMode::AddSum];
    let traces = sweep(&mesh, &modes, |reduction| FitConfig {
        reduction,
        ..FitConfig::default()
    });
    let iters: Vec<Option<usize>> = traces.iter().map(|t| t.iters_to_accuracy(0.99)).collect();
    let ok = iters[0].is_some() && iters[1..].iter().all(|&v| rank(iters[0]) <= rank(v));
    check(
        ok,
        format!(
            "iters to accuracy>=0.99: prod_sum={} max_sum={} add_sum={}",
            fmt_iters(iters[0]),
            fmt_iters(iters[1]),
            fmt_iters(iters[2])
        ),
    )
}

/// Structural invariants checked straight from the halfedge arrays.
fn manifold_violation(he: &HalfedgeMesh) -> Option<String> {
    let h_count = he.halfedge_count() as u32;
    let mut next_hit = vec![false; h_count as usize];
    let mut outgoing = vec![Vec::new(); he.vertex_count()];
    for h in 0..h_count {
        let t = he.twin(h);
        if t == h || t >= h_count || he.twin(t) != h {
            return Some(format!("twin not an involution at {h}"));
        }
        if he.src(t) != he.dst(h) || he.dst(t) != he.src(h) {
            return Some(format!("twin endpoints at {h}"));
        }
        let n = he.next(h);
        if n >= h_count || std::mem::replace(&mut next_hit[n as usize], true) {
            return Some(format!("next not a bijection at {h}"));
        }
        if he.dst(h) != he.src(n) {
            return Some(format!("dst(h) != src(next(h)) at {h}"));
        }
        outgoing[he.src(h) as usize].push(h);
    }
    for (v, out) in outgoing.iter().enumerate() {
        let Some(&first) = out.first() else { continue };
        let mut h = first;
        let mut steps = 0;
        loop {
            h = he.next(he.twin(h));
            steps += 1;
            if h == first || steps > out.len() {
                break;
            }
        }
        if h != first || steps != out.len() {
            return Some(format!("vertex {v} has more than one umbrella"));
        }
    }
    None
}

fn random_tau<R: Rng>(emb: &VertexEmbeddings, mode: DistanceMode, rng: &mut R) -> f64 {
    let n = emb.vertex_count;
    let mut d: Vec<f64> = (0..200)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            pair_distance(emb.x_row(a), emb.x_row(b), emb.dims.k_s, mode).unwrap()
        })
        .collect();
    d.sort_by(f64::total_cmp);
    // Expected degree between zero and roughly a third of the vertices.
    let q = rng.random_range(0.0..0.35);
    d[((d.len() - 1) as f64 * q) as usize] + rng.random_range(-1e-3..1e-3)
}

fn manifoldness_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfa11);
    let mut faces = 0usize;
    let mut fallbacks = 0usize;
    for trial in 0..1000 {
        let n = rng.random_range(4..=200);
        let dims = Dims {
            k_s: rng.random_range(1..=8),
            k_t: rng.random_range(0..=8),
            k_p: rng.random_range(1..=6),
        };
        let distance = *[DistanceMode::Spacetime, DistanceMode::SquaredEuclidean, DistanceMode::NegativeDot]
            .choose(&mut rng)
            .unwrap();
        let reduction = *[ReductionMode::ProdSum, ReductionMode::MaxSum, ReductionMode::AddSum]
            .choose(&mut rng)
            .unwrap();
        let std = rng.random_range(0.05..3.0);
        let mut emb = VertexEmbeddings::random(n, dims, std, 0.0, &mut rng);
        emb.tau = random_tau(&emb, distance, &mut rng);
        let positions = vec![nalgebra::Point3::origin(); n];
        let config = ExtractConfig {
            distance,
            reduction,
            sinkhorn: SinkhornConfig::default(),
        };
        let out = match extract(&emb, &positions, &config) {
            Ok(out) => out,
            Err(e) => return Err(format!("trial {trial}: extraction failed: {e}")),
        };
        if let Some(why) = manifold_violation(&out.halfedge) {
            return Err(format!("trial {trial} (V={n}): {why}"));
        }
        if out.halfedge.halfedge_count() != 2 * out.edges.len() {
            return Err(format!("trial {trial}: halfedges do not cover the decoded edges"));
        }
        faces += out.stats.face_count;
        fallbacks += out.stats.fallback_count;
    }
    Ok(format!("1000 embedding sets, {faces} faces, {fallbacks} single-cycle fallbacks"))
}

fn row_cost(cost: &DMatrix<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum()
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                prefix.push(c);
                go(prefix, used, out);
                prefix.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn assignment_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a9);
    for d in 2..=7 {
        // Generated in lexicographic order, so the first strict minimum is
        // the lexicographically smallest optimum.
        let perms = all_permutations(d);
        let cycles: Vec<&Vec<usize>> = perms.iter().filter(|p| is_single_cycle(p)).collect();
        for trial in 0..1000 {
            // Every other instance has small integer costs, which forces ties.
            let cost = if trial % 2 == 0 {
                DMatrix::from_fn(d, d, |_, _| rng.random_range(-10.0..10.0))
            } else {
                DMatrix::from_fn(d, d, |_, _| rng.random_range(0..4) as f64)
            };
            let mut best = (f64::INFINITY, &perms[0]);
            for p in &perms {
                let c = row_cost(&cost, p);
                if c < best.0 {
                    best = (c, p);
                }
            }
            let lap = solve_lap(&cost).map_err(|e| format!("D={d} trial {trial}: {e}"))?;
            if row_cost(&cost, &lap.permutation) != best.0 || lap.cost != best.0 {
                return Err(format!("D={d} trial {trial}: LAP cost {} vs brute force {}", lap.cost, best.0));
            }
            if trial % 2 == 1 && &lap.permutation != best.1 {
                return Err(format!("D={d} trial {trial}: LAP picked {:?}, lexicographic optimum {:?}", lap.permutation, best.1));
            }

            let best_cycle = cycles.iter().map(|p| row_cost(&cost, p)).fold(f64::INFINITY, f64::min);
            let greedy = greedy_single_cycle(&cost);
            if !is_single_cycle(&greedy.permutation) {
                return Err(format!("D={d} trial {trial}: greedy result {:?} is not one cycle", greedy.permutation));
            }
            if row_cost(&cost, &greedy.permutation) < best_cycle {
                return Err(format!("D={d} trial {trial}: greedy beats the optimal single cycle"));
            }
        }
    }
    Ok("D=2..7, 1000 matrices each: LAP optimal and lexicographically first; greedy single cycle, never below optimum".into())
}

fn edge_objective<'a>(emb: &VertexEmbeddings, target: &'a FitTarget, lambda: f64, mode: DistanceMode) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + 'a {
    let template = emb.clone();
    move |p: &[f64]| {
        let mut e = template.clone();
        e.set_params(p);
        let l = edge_loss_grad(&e, &target.edges, lambda, mode);
        let mut g = vec![0.0; p.len()];
        g[..l.grad_x.len()].copy_from_slice(&l.grad_x);
        *g.last_mut().unwrap() = l.grad_tau;
        (l.loss, g)
    }
}

fn perm_objective<'a>(
    emb: &VertexEmbeddings,
    target: &'a FitTarget,
    reduction: ReductionMode,
    sinkhorn: SinkhornConfig,
) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + 'a {
    let template = emb.clone();
    move |p: &[f64]| {
        let mut e = template.clone();
        e.set_params(p);
        let l = perm_loss_grad(&e, &target.sigma, reduction, &sinkhorn).unwrap();
        let mut g = vec![0.0; e.x.len()];
        g.extend_from_slice(&l.grad_root);
        g.extend_from_slice(&l.grad_prev);
        g.extend_from_slice(&l.grad_next);
        g.push(0.0);
        (l.loss, g)
    }
}

fn gradient_correctness() -> Outcome {
    let meshes = [("tetrahedron", shapes::tetrahedron()), ("torus50", shapes::torus(5, 10, 1.0, 0.35))];
    let distances = [DistanceMode::Spacetime, DistanceMode::SquaredEuclidean, DistanceMode::NegativeDot];
    let reductions = [ReductionMode::ProdSum, ReductionMode::MaxSum, ReductionMode::AddSum];
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ad);
    let mut worst_edge = 0.0f64;
    let mut worst_perm = 0.0f64;
    for (name, mesh) in &meshes {
        let target = FitTarget::from_mesh(mesh).unwrap();
        for config_no in 0..20 {
            let dims = Dims {
                k_s: rng.random_range(1..=6),
                k_t: rng.random_range(0..=6),
                k_p: rng.random_range(1..=5),
            };
            let config = FitConfig {
                dims,
                init_std: rng.random_range(0.2..1.0),
                tau_init: rng.random_range(-1.0..2.0),
                seed: rng.random(),
                ..FitConfig::default()
            };
            let emb = initial_embeddings(mesh.vertex_count(), &config);
            let point = emb.to_params();
            let lambda = rng.random_range(0.05..1.0);
            let sinkhorn = SinkhornConfig {
                max_iters: rng.random_range(1..=30),
                tol: 0.0,
            };
            let e = finite_diff_check(edge_objective(&emb, &target, lambda, distances[config_no % 3]), &point, 1e-5);
            let p = finite_diff_check(perm_objective(&emb, &target, reductions[config_no % 3], sinkhorn), &point, 1e-5);
            if !(e < 1e-4 && p < 1e-4) {
                return Err(format!("{name} config {config_no}: edge rel err {e:.2e}, perm rel err {p:.2e}"));
            }
            worst_edge = worst_edge.max(e);
            worst_perm = worst_perm.max(p);

            // Negative control: a 0.1% error in the analytic gradient must be visible.
            let perm = perm_objective(&emb, &target, reductions[config_no % 3], sinkhorn);
            let skewed = |q: &[f64]| {
                let (v, g) = perm(q);
                (v, g.into_iter().map(|x| x * 1.001).collect())
            };
            if config_no % 3 == 0 && finite_diff_check(skewed, &point, 1e-5) < 1e-4 {
                return Err(format!("{name} config {config_no}: a 1e-3 gradient error went unnoticed"));
            }
        }
    }
    Ok(format!(
        "40 configurations (20 per mesh), max rel err edge {worst_edge:.2e}, perm {worst_perm:.2e}; skewed gradients rejected"
    ))
}

fn sinkhorn_properties() -> Outcome {
    let config = SinkhornConfig {
        max_iters: 1_000_000,
        tol: 1e-12,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c);
    let n = 8;
    let (mut sum_err, mut shift_err, mut perm_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let logits = DMatrix::from_fn(n, n, |_, _| rng.random_range(-20.0..20.0));
        let p = sinkhorn(&logits, &config).map_err(|e| e.to_string())?;
        for k in 0..n {
            sum_err = sum_err.max((p.row(k).sum() - 1.0).abs()).max((p.column(k).sum() - 1.0).abs());
        }

        let c = rng.random_range(-50.0..50.0);
        let shifted = sinkhorn(&logits.add_scalar(c), &config).map_err(|e| e.to_string())?;
        shift_err = shift_err.max((&shifted - &p).amax());

        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        cols.shuffle(&mut rng);
        let permuted = DMatrix::from_fn(n, n, |r, c| logits[(rows[r], cols[c])]);
        let q = sinkhorn(&permuted, &config).map_err(|e| e.to_string())?;
        for r in 0..n {
            for c in 0..n {
                perm_err = perm_err.max((q[(r, c)] - p[(rows[r], cols[c])]).abs());
            }
        }
    }
    check(
        sum_err <= 1e-6 && shift_err <= 1e-10 && perm_err <= 1e-10,
        format!("max sum err {sum_err:.1e}, shift err {shift_err:.1e}, permutation err {perm_err:.1e}"),
    )
}

fn rotate_normals(s: &SampledSurface, degrees: f64) -> SampledSurface {
    let mut out = s.clone();
    for n in &mut out.normals {
        let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let axis = Unit::new_normalize(n.cross(&helper));
        *n = Rotation3::from_axis_angle(&axis, degrees.to_radians()) * *n;
    }
    out
}

fn metric_sanity() -> Outcome {
    let cube = shapes::cube().normalized();
    let s = sample_surface(&cube, 5000, 1).map_err(|e| e.to_string())?;
    let (cd, f1) = chamfer_f1(&s, &s, 0.02).map_err(|e| e.to_string())?;
    let si = self_intersection_pct(&cube);
    let angles = corner_angles(&cube);
    let right = angles.len() == 24 && angles.iter().all(|a| (a - 90.0).abs() < 1e-9);
    let in5 = inaccurate_normals(&rotate_normals(&s, 5.0), &s, 10.0).map_err(|e| e.to_string())?;
    let in15 = inaccurate_normals(&rotate_normals(&s, 15.0), &s, 10.0).map_err(|e| e.to_string())?;
    check(
        cd == 0.0 && f1 == 1.0 && si == 0.0 && right && in5 == 0.0 && in15 == 100.0,
        format!("chamfer={cd} f1={f1} cube self-intersection={si}% right angles={right} IN(5deg)={in5}% IN(15deg)={in15}%"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("roundtrip exactness", roundtrip_exactness),
        ("2000-vertex fit", scalability),
        ("distance ablation ordering", distance_ablation),
        ("reduction ablation ordering", reduction_ablation),
        ("manifoldness of random decodes", manifoldness_fuzz),
        ("assignment oracles", assignment_oracles),
        ("gradient correctness", gradient_correctness),
        ("sinkhorn properties", sinkhorn_properties),
        ("metric sanity", metric_sanity),
    ];
    // `cargo test -- <filter>` runs the criteria whose number or name matches.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == number || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {number} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {number} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
