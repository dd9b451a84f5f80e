use std::path::{Path, PathBuf};
use std::time::Instant;

use meshembed::extraction::{extract as decode, ExtractConfig};
use meshembed::io::{self, EmbeddingFile};
use meshembed::mesh::same_faces;
use meshembed::metrics::{self, MetricsConfig, MetricsReport};
use meshembed::optim::{fit_target, FitTarget};
use meshembed::{
    gt_edges, DistanceMode, FitConfig, FitResult, FitTrace, HalfedgeMesh, PolygonMesh, ReductionMode, Result,
    SinkhornConfig,
};

use crate::Status;

/// `println!` that ignores a closed stdout (for example when piped into
/// `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn say_raw(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// `emb.semb` -> `emb.trace.csv`, in the same directory.
pub fn trace_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.trace.csv"))
}

fn load_target(input: &Path) -> Result<(PolygonMesh, FitTarget)> {
    let mesh = io::read_obj(input)?;
    mesh.check_faces()?;
    let target = FitTarget::from_mesh(&mesh)?;
    Ok((mesh, target))
}

fn run_fit(target: &FitTarget, config: &FitConfig) -> Result<(FitResult, f64)> {
    let start = Instant::now();
    let result = fit_target(target, config, |_| {})?;
    Ok((result, start.elapsed().as_secs_f64()))
}

fn print_fit_summary(result: &FitResult, seconds: f64) {
    let last = result.trace.last();
    say!("iterations: {}", result.trace.records.len());
    say!("adjacency_f1: {}", last.map_or(0.0, |r| r.adjacency_f1));
    say!("perm_accuracy: {}", last.map_or(0.0, |r| r.perm_accuracy));
    say!("converged: {}", result.converged);
    say!("wall_seconds: {seconds:.3}");
}

pub fn fit(input: &Path, output: &Path, config: &FitConfig) -> Result<Status> {
    let (mesh, target) = load_target(input)?;
    let (result, seconds) = run_fit(&target, config)?;
    let file = EmbeddingFile {
        embeddings: result.embeddings.clone(),
        positions: mesh.positions.clone(),
        distance: Some(config.distance),
        reduction: Some(config.reduction),
    };
    io::write_embeddings(&file, output)?;
    let trace = trace_path(output);
    io::write_atomic(&trace, |w| result.trace.write_csv(w))?;
    print_fit_summary(&result, seconds);
    say!("embeddings: {}", output.display());
    say!("trace: {}", trace.display());
    Ok(if result.converged { Status::Ok } else { Status::NotConverged })
}

pub fn extract(
    emb: &Path,
    output: &Path,
    distance: Option<DistanceMode>,
    reduction: Option<ReductionMode>,
    sinkhorn: &SinkhornConfig,
) -> Result<Status> {
    let file = io::read_embeddings(emb)?;
    let config = ExtractConfig {
        distance: distance.or(file.distance).unwrap_or_default(),
        reduction: reduction.or(file.reduction).unwrap_or_default(),
        sinkhorn: *sinkhorn,
    };
    let out = decode(&file.embeddings, &file.positions, &config)?;
    io::write_obj(&out.mesh, output)?;
    say_raw(&out.stats.to_text());
    Ok(Status::Ok)
}

pub fn roundtrip(input: &Path, output: Option<&Path>, config: &FitConfig) -> Result<Status> {
    let (mesh, target) = load_target(input)?;
    let (result, seconds) = run_fit(&target, config)?;
    print_fit_summary(&result, seconds);
    let extract_config = ExtractConfig {
        distance: config.distance,
        reduction: config.reduction,
        sinkhorn: config.sinkhorn,
    };
    let out = decode(&result.embeddings, &mesh.positions, &extract_config)?;
    if let Some(path) = output {
        io::write_obj(&out.mesh, path)?;
    }
    let edges_match = out.edges == target.edges;
    let faces_match = same_faces(&out.mesh.faces, &mesh.faces);
    say!("edges_match: {edges_match}");
    say!("faces_match: {faces_match}");
    Ok(if result.converged && edges_match && faces_match {
        Status::Ok
    } else {
        Status::NotConverged
    })
}

pub fn validate(input: &Path) -> Result<Status> {
    let mesh = io::read_obj(input)?;
    mesh.check_faces()?;
    let report = HalfedgeMesh::build(&mesh)?.validate();
    say_raw(&report.to_text());
    Ok(if report.is_valid() { Status::Ok } else { Status::InputError })
}

pub fn metrics(pred: &Path, gt: &Path, config: &MetricsConfig, csv: Option<&Path>) -> Result<Status> {
    let report = metrics::evaluate(&io::read_obj(pred)?, &io::read_obj(gt)?, config)?;
    if let Some(path) = csv {
        io::write_atomic(path, |w| MetricsReport::write_csv(std::slice::from_ref(&report), w))?;
    }
    say_raw(&report.to_text());
    Ok(Status::Ok)
}

pub fn stats(input: &Path, hist_out: Option<&Path>, bins: usize) -> Result<Status> {
    let mesh = io::read_obj(input)?.normalized();
    let (lengths, angles) = metrics::element_stats(&mesh, bins);
    say!("vertices: {}", mesh.vertex_count());
    say!("faces: {}", mesh.face_count());
    say!("edges: {}", gt_edges(&mesh).len());
    let named = [("edge_length", &lengths), ("corner_angle", &angles)];
    if let Some(path) = hist_out {
        io::write_atomic(path, |w| {
            let mut w = csv::Writer::from_writer(w);
            w.write_record(["histogram", "bin", "lo", "hi", "count"])?;
            for (name, h) in named {
                for (b, c) in h.counts.iter().enumerate() {
                    let (lo, hi) = h.bin_edges(b);
                    w.write_record([name.to_string(), b.to_string(), lo.to_string(), hi.to_string(), c.to_string()])?;
                }
            }
            w.flush()?;
            Ok(())
        })?;
    }
    for (name, h) in named {
        say!("{name}:");
        for (b, c) in h.counts.iter().enumerate() {
            let (lo, hi) = h.bin_edges(b);
            say!("  {lo:.6}..{hi:.6}: {c}");
        }
    }
    Ok(Status::Ok)
}

fn describe(level: Option<usize>) -> String {
    level.map_or_else(|| "not reached".to_string(), |i| i.to_string())
}

pub fn ablate(input: &Path, budget: usize, out: &Path, level: f64, base: &FitConfig) -> Result<Status> {
    let (_, target) = load_target(input)?;
    let base = FitConfig { max_iters: budget, ..*base };
    let mut runs: Vec<(String, FitTrace)> = Vec::new();

    // The baseline configuration shows up in both sweeps; fit it once.
    let baseline = fit_target(&target, &base, |_| {})?.trace;
    for mode in DistanceMode::ALL {
        let trace = if mode == base.distance {
            baseline.clone()
        } else {
            fit_target(&target, &FitConfig { distance: mode, ..base }, |_| {})?.trace
        };
        runs.push((format!("distance={mode}"), trace));
    }
    for mode in ReductionMode::ALL {
        let trace = if mode == base.reduction {
            baseline.clone()
        } else {
            fit_target(&target, &FitConfig { reduction: mode, ..base }, |_| {})?.trace
        };
        runs.push((format!("reduction={mode}"), trace));
    }

    io::write_atomic(out, |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["mode", "iter", "edge_loss", "perm_loss", "adjacency_f1", "perm_accuracy"])?;
        for (mode, trace) in &runs {
            for r in &trace.records {
                w.write_record([
                    mode.clone(),
                    r.iter.to_string(),
                    r.edge_loss.to_string(),
                    r.perm_loss.to_string(),
                    r.adjacency_f1.to_string(),
                    r.perm_accuracy.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;

    say!("{:<30} {:>14} {:>14}", "mode", "iters_to_f1", "iters_to_acc");
    for (mode, trace) in &runs {
        say!(
            "{:<30} {:>14} {:>14}",
            mode,
            describe(trace.iters_to_f1(level)),
            describe(trace.iters_to_accuracy(level))
        );
    }
    Ok(Status::Ok)
}
