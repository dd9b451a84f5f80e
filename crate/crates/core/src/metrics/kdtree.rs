//! Exact nearest-neighbor queries over 3D points.

use nalgebra::Point3;

/// Static 3D k-d tree over a borrowed point set.
pub struct KdTree<'a> {
    points: &'a [Point3<f64>],
    /// Point indices; the subtree over `lo..hi` has its split point at the
    /// middle position.
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Point3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build(points, &mut order, &mut axes, 0, points.len());
        Self { points, order, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the closest point. Ties go to the
    /// point found first in traversal order.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_in(q, 0, self.order.len(), &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn nearest_in(&self, q: &Point3<f64>, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = (p - q).norm_squared();
        if d2 < best.1 {
            *best = (idx, d2);
        }
        let axis = self.axes[mid] as usize;
        let delta = q[axis] - p[axis];
        let (first, second) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.nearest_in(q, first.0, first.1, best);
        if delta * delta < best.1 {
            self.nearest_in(q, second.0, second.1, best);
        }
    }

    /// The `k` closest points as `(index, squared distance)`, nearest first.
    pub fn knn(&self, q: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        let mut found: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.knn_in(q, k, 0, self.order.len(), &mut found);
        }
        found
    }

    fn knn_in(&self, q: &Point3<f64>, k: usize, lo: usize, hi: usize, found: &mut Vec<(usize, f64)>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = (p - q).norm_squared();
        if found.len() < k || d2 < found[found.len() - 1].1 {
            let pos = found.partition_point(|&(_, d)| d <= d2);
            found.insert(pos, (idx, d2));
            found.truncate(k);
        }
        let axis = self.axes[mid] as usize;
        let delta = q[axis] - p[axis];
        let (first, second) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.knn_in(q, k, first.0, first.1, found);
        let bound = if found.len() < k { f64::INFINITY } else { found[found.len() - 1].1 };
        if delta * delta < bound {
            self.knn_in(q, k, second.0, second.1, found);
        }
    }
}

fn build(points: &[Point3<f64>], order: &mut [usize], axes: &mut [u8], lo: usize, hi: usize) {
    if hi - lo <= 1 {
        return;
    }
    let slice = &order[lo..hi];
    let mut min = points[slice[0]];
    let mut max = min;
    for &i in slice {
        for a in 0..3 {
            min[a] = min[a].min(points[i][a]);
            max[a] = max[a].max(points[i][a]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b]))).unwrap();
    let mid = (lo + hi) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    axes[mid] = axis as u8;
    build(points, order, axes, lo, mid);
    build(points, order, axes, mid + 1, hi);
}
