//! Central finite-difference checks of analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gradients smaller than this are compared in absolute terms.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Rounding in `f` is allowed this many ulps per evaluation.
pub const ROUNDOFF_ULPS: f64 = 4.0;

/// Relative error after discounting `slack`, the part of the difference
/// quotient that rounding in `f` alone can explain.
#[inline]
fn rel_err(analytic: f64, numeric: f64, slack: f64) -> f64 {
    ((analytic - numeric).abs() - slack).max(0.0) / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

#[inline]
fn roundoff_slack(up: f64, down: f64, eps: f64) -> f64 {
    ROUNDOFF_ULPS * f64::EPSILON * up.abs().max(down.abs()) / eps
}

/// Largest coordinate-wise relative error between the analytic gradient of
/// `f` at `point` and central differences with step `eps`.
///
/// `f` returns the value and the analytic gradient. Differences no larger
/// than the rounding error of `f` itself (see [`ROUNDOFF_ULPS`]) count as
/// agreement, so exactly-zero gradients of large objectives still check.
pub fn finite_diff_check<F>(f: F, point: &[f64], eps: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, grad) = f(point);
    assert_eq!(grad.len(), point.len());
    let mut p = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + eps;
        let up = f(&p).0;
        p[i] = orig - eps;
        let down = f(&p).0;
        p[i] = orig;
        worst = worst.max(rel_err(grad[i], (up - down) / (2.0 * eps), roundoff_slack(up, down, eps)));
    }
    worst
}

/// Directional variant for large parameter vectors: compares `grad . u`
/// against central differences along `probes` random unit directions.
pub fn finite_diff_check_directional<F>(f: F, point: &[f64], eps: f64, probes: usize, seed: u64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, grad) = f(point);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let mut dir: Vec<f64> = (0..point.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v /= norm);
        let shifted = |s: f64| -> Vec<f64> { point.iter().zip(&dir).map(|(p, d)| p + s * d).collect() };
        let (up, down) = (f(&shifted(eps)).0, f(&shifted(-eps)).0);
        let analytic: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        worst = worst.max(rel_err(analytic, (up - down) / (2.0 * eps), roundoff_slack(up, down, eps)));
    }
    worst
}
