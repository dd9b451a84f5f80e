use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use meshembed::optim::Lambda;
use meshembed::{Dims, DistanceMode, Error, FitConfig, ReductionMode, SinkhornConfig};

mod commands;

/// Exit status contract shared by all subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    InputError = 1,
    NotConverged = 2,
    Internal = 3,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

pub fn status_of(err: &Error) -> Status {
    match err {
        Error::NonFinite(_) | Error::InconsistentSigma(_) | Error::GraphMismatch => Status::Internal,
        _ => Status::InputError,
    }
}

/// Encode mesh connectivity as per-vertex embeddings and decode it back.
#[derive(Parser, Debug)]
#[command(name = "meshembed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit embeddings to a mesh; writes the embedding file and a
    /// `<output stem>.trace.csv` convergence log next to it.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Decode an embedding file into an OBJ mesh.
    Extract {
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Distance mode; defaults to the one stored in the file, else spacetime.
        #[arg(long)]
        distance: Option<DistanceMode>,
        /// Reduction mode; defaults to the one stored in the file, else prod_sum.
        #[arg(long)]
        reduction: Option<ReductionMode>,
        #[command(flatten)]
        sinkhorn: SinkhornArgs,
    },
    /// Fit, decode and compare against the input connectivity.
    Roundtrip {
        #[arg(long)]
        input: PathBuf,
        /// Also write the decoded mesh here.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Check that a mesh is a closed, oriented, edge-manifold surface.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Compare a predicted mesh against a reference surface.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[command(flatten)]
        metrics: MetricsArgs,
        /// Also write the report as CSV (header plus one row).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Edge-length and corner-angle histograms of a mesh.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// CSV with columns histogram,bin,lo,hi,count.
        #[arg(long)]
        hist_out: Option<PathBuf>,
        #[arg(long, default_value_t = 18)]
        bins: usize,
    },
    /// Fit under every distance mode and every reduction mode from one
    /// shared initialization and record the convergence curves.
    Ablate {
        #[arg(long)]
        input: PathBuf,
        /// Iteration budget per mode.
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        /// Curves CSV with columns mode,iter,edge_loss,perm_loss,adjacency_f1,perm_accuracy.
        #[arg(long)]
        out: PathBuf,
        /// Level reported as iterations-to-level per mode.
        #[arg(long, default_value_t = 0.99)]
        level: f64,
        #[command(flatten)]
        fit: FitArgs,
    },
}

fn parse_lambda(s: &str) -> Result<Lambda, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Lambda::Auto);
    }
    s.parse::<f64>().map(Lambda::Fixed).map_err(|_| format!("expected `auto` or a number, got `{s}`"))
}

#[derive(Args, Debug, Clone)]
struct SinkhornArgs {
    /// Maximum Sinkhorn row normalizations.
    #[arg(long, default_value_t = SinkhornConfig::default().max_iters)]
    sinkhorn_iters: usize,
    /// Sinkhorn stopping tolerance on column sums (0 runs every pass).
    #[arg(long, default_value_t = SinkhornConfig::default().tol)]
    sinkhorn_tol: f64,
}

impl SinkhornArgs {
    fn config(&self) -> SinkhornConfig {
        SinkhornConfig {
            max_iters: self.sinkhorn_iters,
            tol: self.sinkhorn_tol,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    /// Space dimensions of the adjacency embedding.
    #[arg(long, default_value_t = Dims::default().k_s)]
    k_s: usize,
    /// Time dimensions of the adjacency embedding.
    #[arg(long, default_value_t = Dims::default().k_t)]
    k_t: usize,
    /// Dimensions of each permutation feature.
    #[arg(long, default_value_t = Dims::default().k_p)]
    k_p: usize,
    /// spacetime, squared_euclidean or negative_dot.
    #[arg(long, default_value_t = DistanceMode::default())]
    distance: DistanceMode,
    /// prod_sum, max_sum or add_sum.
    #[arg(long, default_value_t = ReductionMode::default())]
    reduction: ReductionMode,
    /// Adam learning rate.
    #[arg(long, default_value_t = FitConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = FitConfig::default().max_iters)]
    max_iters: usize,
    /// Non-edge weight: `auto` (4E/V^2) or a positive number.
    #[arg(long, default_value = "auto", value_parser = parse_lambda)]
    lambda: Lambda,
    /// Weight of the permutation loss.
    #[arg(long, default_value_t = FitConfig::default().perm_weight)]
    perm_weight: f64,
    #[command(flatten)]
    sinkhorn: SinkhornArgs,
    /// Standard deviation of the Gaussian initialization.
    #[arg(long, default_value_t = FitConfig::default().init_std)]
    init_std: f64,
    /// Initial edge threshold.
    #[arg(long, default_value_t = FitConfig::default().tau_init)]
    tau_init: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample this many non-edge pairs per iteration instead of all pairs.
    #[arg(long)]
    negative_samples: Option<usize>,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            dims: Dims {
                k_s: self.k_s,
                k_t: self.k_t,
                k_p: self.k_p,
            },
            distance: self.distance,
            reduction: self.reduction,
            learning_rate: self.lr,
            max_iters: self.max_iters,
            lambda: self.lambda,
            perm_weight: self.perm_weight,
            sinkhorn: self.sinkhorn.config(),
            init_std: self.init_std,
            tau_init: self.tau_init,
            seed: self.seed,
            negative_samples: self.negative_samples,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct MetricsArgs {
    /// Surface samples per mesh.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Match distance for F-scores, in normalized units.
    #[arg(long, default_value_t = 0.02)]
    threshold: f64,
    /// Neighbors used to classify sharp-feature points.
    #[arg(long, default_value_t = 10)]
    edge_neighbors: usize,
    /// Mean normal dot product below which a point is a sharp-feature point.
    #[arg(long, default_value_t = 0.2)]
    edge_dot: f64,
    /// Angle above which a normal counts as inaccurate, in degrees.
    #[arg(long, default_value_t = 10.0)]
    normal_degrees: f64,
    #[arg(long, default_value_t = 18)]
    bins: usize,
}

impl MetricsArgs {
    fn config(&self) -> meshembed::metrics::MetricsConfig {
        meshembed::metrics::MetricsConfig {
            samples: self.samples,
            seed: self.seed,
            threshold: self.threshold,
            edge_neighbors: self.edge_neighbors,
            edge_dot_threshold: self.edge_dot,
            normal_degrees: self.normal_degrees,
            bins: self.bins,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::InputError } else { Status::Ok }.into();
        }
    };
    let result = match cli.command {
        Command::Fit { input, output, fit } => commands::fit(&input, &output, &fit.config()),
        Command::Extract {
            emb,
            output,
            distance,
            reduction,
            sinkhorn,
        } => commands::extract(&emb, &output, distance, reduction, &sinkhorn.config()),
        Command::Roundtrip { input, output, fit } => commands::roundtrip(&input, output.as_deref(), &fit.config()),
        Command::Validate { input } => commands::validate(&input),
        Command::Metrics { pred, gt, metrics, csv } => commands::metrics(&pred, &gt, &metrics.config(), csv.as_deref()),
        Command::Stats { input, hist_out, bins } => commands::stats(&input, hist_out.as_deref(), bins),
        Command::Ablate {
            input,
            budget,
            out,
            level,
            fit,
        } => commands::ablate(&input, budget, &out, level, &fit.config()),
    };
    match result {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("error: {e}");
            status_of(&e).into()
        }
    }
}
