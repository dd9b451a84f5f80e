//! Log-domain Sinkhorn normalization with a reverse-mode tape.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornConfig {
    /// Upper bound on row normalizations.
    pub max_iters: usize,
    /// Stop once every column sum is within `tol` of one after a row pass.
    /// Zero runs exactly `max_iters` passes.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Rows,
    Cols,
}

/// Recorded normalization passes; each entry keeps the exponentiated pass
/// output.
pub(crate) struct Tape {
    passes: Vec<(Axis, DMatrix<f64>)>,
}

/// Normalizes the lines of `m` along `axis` in the log domain and writes
/// `exp(m)` of the result into `p`.
fn normalize(m: &mut DMatrix<f64>, p: &mut DMatrix<f64>, axis: Axis) {
    let d = m.nrows();
    let at = |line: usize, k: usize| match axis {
        Axis::Rows => (line, k),
        Axis::Cols => (k, line),
    };
    for line in 0..d {
        let mut max = f64::NEG_INFINITY;
        for k in 0..d {
            max = max.max(m[at(line, k)]);
        }
        let mut sum = 0.0;
        for k in 0..d {
            let e = (m[at(line, k)] - max).exp();
            p[at(line, k)] = e;
            sum += e;
        }
        let shift = max + sum.ln();
        for k in 0..d {
            m[at(line, k)] -= shift;
            p[at(line, k)] /= sum;
        }
    }
}

fn max_col_deviation(p: &DMatrix<f64>) -> f64 {
    p.column_iter().map(|col| (col.sum() - 1.0).abs()).fold(0.0, f64::max)
}

/// Returns the log-domain result, its exponential and the row-pass count.
fn run(
    logits: &DMatrix<f64>,
    config: &SinkhornConfig,
    mut record: Option<&mut Tape>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, usize)> {
    if !logits.is_square() {
        return Err(Error::DimensionMismatch {
            expected: logits.nrows(),
            found: logits.ncols(),
        });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sinkhorn input"));
    }
    let mut m = logits.clone();
    let mut p = DMatrix::zeros(m.nrows(), m.ncols());
    let mut push = |axis: Axis, p: &DMatrix<f64>| {
        if let Some(tape) = record.as_deref_mut() {
            tape.passes.push((axis, p.clone()));
        }
    };
    let mut passes = 0;
    loop {
        normalize(&mut m, &mut p, Axis::Rows);
        push(Axis::Rows, &p);
        passes += 1;
        if passes >= config.max_iters.max(1) || max_col_deviation(&p) < config.tol {
            break;
        }
        normalize(&mut m, &mut p, Axis::Cols);
        push(Axis::Cols, &p);
    }
    Ok((m, p, passes))
}

/// Alternating row/column normalization of `exp(logits)`, carried out on the
/// logits. Returns the log of the normalized matrix and the number of row
/// passes. The last pass is always a row pass.
pub fn sinkhorn_log(logits: &DMatrix<f64>, config: &SinkhornConfig) -> Result<(DMatrix<f64>, usize)> {
    let (m, _, passes) = run(logits, config, None)?;
    Ok((m, passes))
}

/// Doubly-stochastic matrix obtained from the log-potentials `logits`.
pub fn sinkhorn(logits: &DMatrix<f64>, config: &SinkhornConfig) -> Result<DMatrix<f64>> {
    Ok(run(logits, config, None)?.1)
}

pub(crate) fn sinkhorn_forward(logits: &DMatrix<f64>, config: &SinkhornConfig) -> Result<(DMatrix<f64>, Tape)> {
    let mut tape = Tape { passes: Vec::new() };
    let (out, _, _) = run(logits, config, Some(&mut tape))?;
    Ok((out, tape))
}

/// Pulls a gradient with respect to the log-domain output back to the
/// logits.
///
/// A row pass `y = x - lse_row(x)` has Jacobian-vector product
/// `dx = dy - exp(y) * rowsum(dy)`; column passes are the transpose.
pub(crate) fn sinkhorn_backward(tape: &Tape, grad_out: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = grad_out.clone();
    let d = g.nrows();
    for (axis, p) in tape.passes.iter().rev() {
        match axis {
            Axis::Rows => {
                for r in 0..d {
                    let s: f64 = (0..d).map(|c| g[(r, c)]).sum();
                    for c in 0..d {
                        g[(r, c)] -= p[(r, c)] * s;
                    }
                }
            }
            Axis::Cols => {
                for c in 0..d {
                    let s: f64 = g.column(c).sum();
                    for r in 0..d {
                        g[(r, c)] -= p[(r, c)] * s;
                    }
                }
            }
        }
    }
    g
}

/// Column of the largest entry in each row; ties resolve to the lowest
/// column.
pub fn row_argmax(m: &DMatrix<f64>) -> Vec<usize> {
    (0..m.nrows())
        .map(|r| {
            let mut best = 0;
            for c in 1..m.ncols() {
                if m[(r, c)] > m[(r, best)] {
                    best = c;
                }
            }
            best
        })
        .collect()
}
