//! Connectivity losses and their exact gradients.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::embedding::{
    build_phi_log, distance, row_argmax, sinkhorn_backward, sinkhorn_forward, DistanceMode, ReductionMode,
    SinkhornConfig, VertexEmbeddings,
};
use crate::error::{Error, Result};
use crate::mesh::{neighbor_lists, EdgeSet, VertexPermutation};

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Edge classification counts against the ground-truth edge set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl EdgeCounts {
    pub fn f1(&self) -> f64 {
        let tp = self.true_positive as f64;
        let denom = 2.0 * tp + self.false_positive as f64 + self.false_negative as f64;
        if denom == 0.0 {
            1.0
        } else {
            2.0 * tp / denom
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeLoss {
    pub loss: f64,
    /// Same layout as [`VertexEmbeddings::x`].
    pub grad_x: Vec<f64>,
    pub grad_tau: f64,
    /// Exact over all pairs when no sampling is used; otherwise `None`.
    pub counts: Option<EdgeCounts>,
}

/// Accumulates one pair's contribution. `coef` is the derivative of the pair
/// loss with respect to the distance.
#[inline]
fn push_distance_grad(
    xi: &[f64],
    xj: &[f64],
    k_s: usize,
    mode: DistanceMode,
    coef: f64,
    gi: &mut [f64],
    gj: &mut [f64],
) {
    match mode {
        DistanceMode::Spacetime | DistanceMode::SquaredEuclidean => {
            let space = if mode == DistanceMode::Spacetime { k_s } else { xi.len() };
            for c in 0..xi.len() {
                let sign = if c < space { 2.0 } else { -2.0 };
                let g = sign * coef * (xi[c] - xj[c]);
                gi[c] += g;
                gj[c] -= g;
            }
        }
        DistanceMode::NegativeDot => {
            for c in 0..xi.len() {
                gi[c] -= coef * xj[c];
                gj[c] -= coef * xi[c];
            }
        }
    }
}

/// Loss, distance derivative and tau derivative of one pair.
#[inline]
fn pair_terms(d: f64, tau: f64, is_edge: bool, weight: f64) -> (f64, f64, f64) {
    if is_edge {
        // -log sigmoid(tau - d)
        let s = sigmoid(d - tau);
        (softplus(d - tau), s, -s)
    } else {
        // -weight * log sigmoid(d - tau)
        let s = sigmoid(tau - d);
        (weight * softplus(tau - d), -weight * s, weight * s)
    }
}

/// Rows are processed in a fixed number of blocks, independent of the thread
/// count, and block results are summed in block order.
const ROW_BLOCKS: usize = 16;

/// Negative log-likelihood of the edge set over all unordered pairs:
///
/// `sum_{edges} softplus(d - tau) + lambda * sum_{non-edges} softplus(tau - d)`.
pub fn edge_loss_grad(emb: &VertexEmbeddings, gt_edges: &EdgeSet, lambda: f64, mode: DistanceMode) -> EdgeLoss {
    let n = emb.vertex_count;
    let k = emb.dims.k();
    let k_s = emb.dims.k_s;
    let tau = emb.tau;
    let neighbors = neighbor_lists(n, gt_edges);
    let block_len = n.div_ceil(ROW_BLOCKS).max(1);

    let partials: Vec<(f64, f64, EdgeCounts, Vec<f64>)> = (0..n.div_ceil(block_len))
        .into_par_iter()
        .map(|b| {
            let mut grad = vec![0.0; n * k];
            let mut loss = 0.0;
            let mut gtau = 0.0;
            let mut counts = EdgeCounts::default();
            for i in b * block_len..((b + 1) * block_len).min(n) {
                let xi = emb.x_row(i);
                let nb = &neighbors[i];
                let mut cursor = nb.partition_point(|&v| (v as usize) <= i);
                for j in (i + 1)..n {
                    let is_edge = cursor < nb.len() && nb[cursor] as usize == j;
                    if is_edge {
                        cursor += 1;
                    }
                    let xj = emb.x_row(j);
                    let d = distance(xi, xj, k_s, mode);
                    let predicted = d < tau;
                    match (is_edge, predicted) {
                        (true, true) => counts.true_positive += 1,
                        (true, false) => counts.false_negative += 1,
                        (false, true) => counts.false_positive += 1,
                        (false, false) => {}
                    }
                    let (l, dd, dt) = pair_terms(d, tau, is_edge, lambda);
                    loss += l;
                    gtau += dt;
                    let (lo, hi) = grad.split_at_mut(j * k);
                    push_distance_grad(xi, xj, k_s, mode, dd, &mut lo[i * k..(i + 1) * k], &mut hi[..k]);
                }
            }
            (loss, gtau, counts, grad)
        })
        .collect();

    let mut out = EdgeLoss {
        loss: 0.0,
        grad_x: vec![0.0; n * k],
        grad_tau: 0.0,
        counts: Some(EdgeCounts::default()),
    };
    let total = out.counts.as_mut().unwrap();
    for (loss, gtau, counts, grad) in partials {
        out.loss += loss;
        out.grad_tau += gtau;
        total.true_positive += counts.true_positive;
        total.false_positive += counts.false_positive;
        total.false_negative += counts.false_negative;
        for (a, b) in out.grad_x.iter_mut().zip(&grad) {
            *a += b;
        }
    }
    out
}

/// Like [`edge_loss_grad`] but the non-edge sum is estimated from `samples`
/// uniformly drawn non-edges (with replacement), rescaled so its expectation
/// equals the exact term.
pub fn edge_loss_grad_sampled<R: Rng + ?Sized>(
    emb: &VertexEmbeddings,
    gt_edges: &EdgeSet,
    lambda: f64,
    mode: DistanceMode,
    samples: usize,
    rng: &mut R,
) -> EdgeLoss {
    let n = emb.vertex_count;
    let k = emb.dims.k();
    let k_s = emb.dims.k_s;
    let tau = emb.tau;
    let mut grad = vec![0.0; n * k];
    let mut loss = 0.0;
    let mut gtau = 0.0;

    let mut accumulate = |i: usize, j: usize, is_edge: bool, weight: f64, grad: &mut Vec<f64>| {
        let (xi, xj) = (emb.x_row(i), emb.x_row(j));
        let d = distance(xi, xj, k_s, mode);
        let (l, dd, dt) = pair_terms(d, tau, is_edge, weight);
        loss += l;
        gtau += dt;
        let (lo, hi) = grad.split_at_mut(j * k);
        push_distance_grad(xi, xj, k_s, mode, dd, &mut lo[i * k..(i + 1) * k], &mut hi[..k]);
    };

    for &(a, b) in gt_edges {
        accumulate(a as usize, b as usize, true, 1.0, &mut grad);
    }
    let all_pairs = n * n.saturating_sub(1) / 2;
    let non_edges = all_pairs - gt_edges.len();
    if samples > 0 && non_edges > 0 {
        let weight = lambda * non_edges as f64 / samples as f64;
        let mut drawn = 0;
        while drawn < samples {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let (i, j) = (a.min(b), a.max(b));
            if gt_edges.contains(&(i as u32, j as u32)) {
                continue;
            }
            accumulate(i, j, false, weight, &mut grad);
            drawn += 1;
        }
    }
    EdgeLoss {
        loss,
        grad_x: grad,
        grad_tau: gtau,
        counts: None,
    }
}

/// Edge classification counts of the decoded edge set.
pub fn edge_counts(emb: &VertexEmbeddings, gt_edges: &EdgeSet, mode: DistanceMode) -> EdgeCounts {
    let decoded = crate::embedding::decode_edges(emb, mode);
    let tp = decoded.intersection(gt_edges).count();
    EdgeCounts {
        true_positive: tp,
        false_positive: decoded.len() - tp,
        false_negative: gt_edges.len() - tp,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermLoss {
    pub loss: f64,
    pub grad_root: Vec<f64>,
    pub grad_prev: Vec<f64>,
    pub grad_next: Vec<f64>,
    /// Rows whose argmax hits the ground-truth successor.
    pub correct: usize,
    pub total: usize,
}

impl PermLoss {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

struct VertexPermTerm {
    loss: f64,
    correct: usize,
    grad_root: Vec<f64>,
    grad_prev: Vec<f64>,
    grad_next: Vec<f64>,
}

/// Adds `g * dF/d(feature)` for one logit to the three feature gradients.
#[inline]
fn push_reduction_grad(
    root: &[f64],
    prev: &[f64],
    next: &[f64],
    mode: ReductionMode,
    g: f64,
    g_root: &mut [f64],
    g_prev: &mut [f64],
    g_next: &mut [f64],
) {
    for c in 0..root.len() {
        match mode {
            ReductionMode::ProdSum => {
                g_root[c] += g * prev[c] * next[c];
                g_prev[c] += g * root[c] * next[c];
                g_next[c] += g * root[c] * prev[c];
            }
            ReductionMode::MaxSum => {
                // Subgradient goes to the first maximal entry in the order
                // prev, root, next.
                let (p, r, n) = (prev[c], root[c], next[c]);
                if p >= r && p >= n {
                    g_prev[c] += g;
                } else if r >= n {
                    g_root[c] += g;
                } else {
                    g_next[c] += g;
                }
            }
            ReductionMode::AddSum => {
                g_root[c] += g;
                g_prev[c] += g;
                g_next[c] += g;
            }
        }
    }
}

fn vertex_perm_term(
    emb: &VertexEmbeddings,
    center: usize,
    neighbors: &[u32],
    succ: &[usize],
    reduction: ReductionMode,
    sinkhorn: &SinkhornConfig,
) -> Result<VertexPermTerm> {
    let d = neighbors.len();
    let kp = emb.dims.k_p;
    let logits = build_phi_log(emb, center, neighbors, reduction);
    let (log_bar, tape) = sinkhorn_forward(&logits, sinkhorn)?;

    let mut loss = 0.0;
    let mut grad_out = DMatrix::zeros(d, d);
    for (r, &c) in succ.iter().enumerate() {
        loss -= log_bar[(r, c)];
        grad_out[(r, c)] = -1.0;
    }
    let correct = row_argmax(&log_bar).iter().zip(succ).filter(|(a, b)| a == b).count();

    let grad_logits = sinkhorn_backward(&tape, &grad_out);
    let root = emb.root_row(center);
    let mut grad_root = vec![0.0; kp];
    let mut grad_prev = vec![0.0; d * kp];
    let mut grad_next = vec![0.0; d * kp];
    for r in 0..d {
        let prev = emb.prev_row(neighbors[r] as usize);
        for c in 0..d {
            let next = emb.next_row(neighbors[c] as usize);
            let (gp, gn) = (&mut grad_prev[r * kp..(r + 1) * kp], &mut grad_next[c * kp..(c + 1) * kp]);
            push_reduction_grad(root, prev, next, reduction, grad_logits[(r, c)], &mut grad_root, gp, gn);
        }
    }
    Ok(VertexPermTerm {
        loss,
        correct,
        grad_root,
        grad_prev,
        grad_next,
    })
}

/// `sum_i sum_j -log phi_bar^i[j, sigma_i(j)]` over the ground-truth
/// neighborhoods, differentiated through the unrolled Sinkhorn passes.
pub fn perm_loss_grad(
    emb: &VertexEmbeddings,
    gt_sigma: &VertexPermutation,
    reduction: ReductionMode,
    sinkhorn: &SinkhornConfig,
) -> Result<PermLoss> {
    let n = emb.vertex_count;
    let kp = emb.dims.k_p;
    if gt_sigma.vertex_count() != n {
        return Err(Error::GraphMismatch);
    }
    for i in 0..n {
        if gt_sigma.next[i].len() != gt_sigma.neighbors[i].len() {
            return Err(Error::InconsistentSigma(i as u32));
        }
    }

    let terms: Vec<Result<Option<VertexPermTerm>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nbrs = &gt_sigma.neighbors[i];
            if nbrs.is_empty() {
                return Ok(None);
            }
            vertex_perm_term(emb, i, nbrs, &gt_sigma.next[i], reduction, sinkhorn).map(Some)
        })
        .collect();

    let mut out = PermLoss {
        loss: 0.0,
        grad_root: vec![0.0; n * kp],
        grad_prev: vec![0.0; n * kp],
        grad_next: vec![0.0; n * kp],
        correct: 0,
        total: gt_sigma.entry_count(),
    };
    let add = |dst: &mut [f64], v: usize, src: &[f64]| {
        for (a, b) in dst[v * kp..(v + 1) * kp].iter_mut().zip(src) {
            *a += b;
        }
    };
    for (i, term) in terms.into_iter().enumerate() {
        let Some(term) = term? else { continue };
        out.loss += term.loss;
        out.correct += term.correct;
        add(&mut out.grad_root, i, &term.grad_root);
        for (r, &j) in gt_sigma.neighbors[i].iter().enumerate() {
            add(&mut out.grad_prev, j as usize, &term.grad_prev[r * kp..(r + 1) * kp]);
            add(&mut out.grad_next, j as usize, &term.grad_next[r * kp..(r + 1) * kp]);
        }
    }
    Ok(out)
}
