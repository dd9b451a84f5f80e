//! Fitting per-vertex embeddings to the connectivity of a given mesh.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{Dims, DistanceMode, ReductionMode, SinkhornConfig, VertexEmbeddings};
use crate::error::{Error, Result};
use crate::mesh::{gt_edges, EdgeSet, HalfedgeMesh, PolygonMesh, VertexPermutation};

mod adam;
mod gradcheck;
mod loss;

pub use adam::Adam;
pub use gradcheck::{finite_diff_check, finite_diff_check_directional, REL_ERR_FLOOR, ROUNDOFF_ULPS};
pub use loss::{
    edge_counts, edge_loss_grad, edge_loss_grad_sampled, perm_loss_grad, sigmoid, softplus, EdgeCounts, EdgeLoss,
    PermLoss,
};

/// Weight of the non-edge term of the edge loss.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Lambda {
    /// `4 * edges / vertices^2`
    #[default]
    Auto,
    Fixed(f64),
}

impl Lambda {
    pub fn resolve(self, vertex_count: usize, edge_count: usize) -> f64 {
        match self {
            Lambda::Auto => 4.0 * edge_count as f64 / (vertex_count as f64 * vertex_count as f64),
            Lambda::Fixed(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitConfig {
    pub dims: Dims,
    pub distance: DistanceMode,
    pub reduction: ReductionMode,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub lambda: Lambda,
    /// Multiplier of the permutation loss in the joint objective.
    pub perm_weight: f64,
    pub sinkhorn: SinkhornConfig,
    pub init_std: f64,
    pub tau_init: f64,
    pub seed: u64,
    /// Estimate the non-edge term from this many sampled pairs per
    /// iteration instead of summing all pairs.
    pub negative_samples: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            dims: Dims::default(),
            distance: DistanceMode::default(),
            reduction: ReductionMode::default(),
            learning_rate: 0.1,
            max_iters: 2000,
            lambda: Lambda::Auto,
            perm_weight: 1.0,
            sinkhorn: SinkhornConfig::default(),
            init_std: 0.3,
            tau_init: 1.0,
            seed: 0,
            negative_samples: None,
        }
    }
}

impl FitConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.dims.k_s == 0 || self.dims.k_p == 0 {
            return Err(Error::Config("k_s and k_p must be at least 1".into()));
        }
        if !(self.init_std >= 0.0) || !self.tau_init.is_finite() {
            return Err(Error::Config("init_std must be >= 0 and tau_init finite".into()));
        }
        if let Lambda::Fixed(l) = self.lambda {
            if !(l > 0.0) {
                return Err(Error::Config("lambda must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub iter: usize,
    pub edge_loss: f64,
    pub perm_loss: f64,
    pub adjacency_f1: f64,
    pub perm_accuracy: f64,
    pub wall_ms: f64,
}

impl FitRecord {
    /// Equality on everything but wall time.
    pub fn same_values(&self, other: &Self) -> bool {
        self.iter == other.iter
            && self.edge_loss.to_bits() == other.edge_loss.to_bits()
            && self.perm_loss.to_bits() == other.perm_loss.to_bits()
            && self.adjacency_f1.to_bits() == other.adjacency_f1.to_bits()
            && self.perm_accuracy.to_bits() == other.perm_accuracy.to_bits()
    }
}

/// Per-iteration convergence record. Each entry describes the parameters
/// before that iteration's update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitTrace {
    pub records: Vec<FitRecord>,
}

impl FitTrace {
    pub fn last(&self) -> Option<&FitRecord> {
        self.records.last()
    }

    /// First iteration whose adjacency F1 reaches `threshold`.
    pub fn iters_to_f1(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.adjacency_f1 >= threshold).map(|r| r.iter)
    }

    /// First iteration whose permutation accuracy reaches `threshold`.
    pub fn iters_to_accuracy(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.perm_accuracy >= threshold).map(|r| r.iter)
    }

    pub fn same_values(&self, other: &Self) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| a.same_values(b))
    }

    /// CSV with header `iter,edge_loss,perm_loss,adjacency_f1,perm_accuracy,wall_ms`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        if self.records.is_empty() {
            w.write_record(["iter", "edge_loss", "perm_loss", "adjacency_f1", "perm_accuracy", "wall_ms"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let records = r.deserialize().collect::<std::result::Result<Vec<FitRecord>, _>>()?;
        Ok(Self { records })
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub embeddings: VertexEmbeddings,
    pub trace: FitTrace,
    /// Adjacency F1 and permutation accuracy both reached 1.
    pub converged: bool,
}

/// Connectivity targets of a closed manifold mesh.
#[derive(Clone, Debug)]
pub struct FitTarget {
    pub vertex_count: usize,
    pub edges: EdgeSet,
    pub sigma: VertexPermutation,
}

impl FitTarget {
    pub fn from_mesh(mesh: &PolygonMesh) -> Result<Self> {
        let he = HalfedgeMesh::build(mesh)?;
        let sigma = VertexPermutation::from_halfedge(&he)?;
        Ok(Self {
            vertex_count: mesh.vertex_count(),
            edges: gt_edges(mesh),
            sigma,
        })
    }
}

/// Seeded initial embeddings for `config`.
pub fn initial_embeddings(vertex_count: usize, config: &FitConfig) -> VertexEmbeddings {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    VertexEmbeddings::random(vertex_count, config.dims, config.init_std, config.tau_init, &mut rng)
}

/// Fits embeddings to `mesh` with Adam on the sum of the edge loss and the
/// weighted permutation loss.
pub fn fit(mesh: &PolygonMesh, config: &FitConfig) -> Result<FitResult> {
    let target = FitTarget::from_mesh(mesh)?;
    fit_target(&target, config, |_| {})
}

/// [`fit`] against precomputed targets; `on_record` sees every trace entry
/// as it is produced.
pub fn fit_target(
    target: &FitTarget,
    config: &FitConfig,
    mut on_record: impl FnMut(&FitRecord),
) -> Result<FitResult> {
    config.check()?;
    let n = target.vertex_count;
    target.sigma.check_against(n, &target.edges)?;
    let lambda = config.lambda.resolve(n, target.edges.len());

    let mut emb = initial_embeddings(n, config);
    let mut params = emb.to_params();
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut trace = FitTrace::default();
    let mut converged = false;
    let start = Instant::now();

    for iter in 0..config.max_iters {
        let edge = match config.negative_samples {
            None => edge_loss_grad(&emb, &target.edges, lambda, config.distance),
            Some(m) => edge_loss_grad_sampled(&emb, &target.edges, lambda, config.distance, m, &mut sample_rng),
        };
        let counts = match edge.counts {
            Some(c) => c,
            None => edge_counts(&emb, &target.edges, config.distance),
        };
        let perm = perm_loss_grad(&emb, &target.sigma, config.reduction, &config.sinkhorn)?;

        let record = FitRecord {
            iter,
            edge_loss: edge.loss,
            perm_loss: perm.loss,
            adjacency_f1: counts.f1(),
            perm_accuracy: perm.accuracy(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        if !(record.edge_loss.is_finite() && record.perm_loss.is_finite()) {
            return Err(Error::NonFinite("fit loss"));
        }
        on_record(&record);
        let done = record.adjacency_f1 == 1.0 && record.perm_accuracy == 1.0;
        trace.records.push(record);
        if done {
            converged = true;
            break;
        }

        let mut grads = Vec::with_capacity(params.len());
        grads.extend_from_slice(&edge.grad_x);
        for g in [&perm.grad_root, &perm.grad_prev, &perm.grad_next] {
            grads.extend(g.iter().map(|v| v * config.perm_weight));
        }
        grads.push(edge.grad_tau);
        adam.step(&mut params, &grads);
        emb.set_params(&params);
    }

    Ok(FitResult {
        embeddings: emb,
        trace,
        converged,
    })
}
