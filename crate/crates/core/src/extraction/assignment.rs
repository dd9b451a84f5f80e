//! Square assignment problems: exact minimum-cost matching and a greedy
//! matching restricted to single cycles.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
pub use crate::mesh::is_single_cycle;

/// A bijection `row -> permutation[row]` and its total cost.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentResult {
    pub permutation: Vec<usize>,
    pub cost: f64,
    pub used_fallback: bool,
}

fn total_cost(cost: &DMatrix<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum()
}

/// Minimum-cost bijection (shortest augmenting paths with row/column
/// potentials, `O(D^3)`).
///
/// Among optimal bijections the lexicographically smallest permutation
/// vector is returned: row 0 takes the lowest column it can while staying
/// optimal, then row 1, and so on. Optimality is decided on the tight edges
/// of the final dual solution.
pub fn solve_lap(cost: &DMatrix<f64>) -> Result<AssignmentResult> {
    let n = cost.nrows();
    if n != cost.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cost.ncols(),
        });
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assignment cost"));
    }
    if n == 0 {
        return Ok(AssignmentResult {
            permutation: Vec::new(),
            cost: 0.0,
            used_fallback: false,
        });
    }

    // 1-based potentials; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }

    let scale = cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let eps = 1e-10 * scale * n as f64;
    let tight = |r: usize, c: usize| cost[(r, c)] - u[r + 1] - v[c + 1] <= eps;
    lexicographic_refine(n, &tight, &mut perm);

    Ok(AssignmentResult {
        cost: total_cost(cost, &perm),
        permutation: perm,
        used_fallback: false,
    })
}

/// Turns a perfect matching on the tight graph into the lexicographically
/// smallest perfect matching of that graph.
fn lexicographic_refine(n: usize, tight: &dyn Fn(usize, usize) -> bool, perm: &mut [usize]) {
    let mut owner = vec![0usize; n];
    for (r, &c) in perm.iter().enumerate() {
        owner[c] = r;
    }
    let mut locked_col = vec![false; n];

    // Re-route `row` (which loses its column) to `target` through unlocked rows.
    fn reroute(
        row: usize,
        target: usize,
        n: usize,
        tight: &dyn Fn(usize, usize) -> bool,
        locked_col: &[bool],
        banned: usize,
        visited: &mut [bool],
        perm: &mut [usize],
        owner: &mut [usize],
    ) -> bool {
        for c in 0..n {
            if locked_col[c] || c == banned || visited[c] || !tight(row, c) {
                continue;
            }
            visited[c] = true;
            if c == target {
                perm[row] = c;
                owner[c] = row;
                return true;
            }
            let other = owner[c];
            if reroute(other, target, n, tight, locked_col, banned, visited, perm, owner) {
                perm[row] = c;
                owner[c] = row;
                return true;
            }
        }
        false
    }

    for r in 0..n {
        for c in 0..perm[r] {
            if locked_col[c] || !tight(r, c) {
                continue;
            }
            let displaced = owner[c];
            let freed = perm[r];
            let mut trial_perm = perm.to_vec();
            let mut trial_owner = owner.clone();
            let mut visited = vec![false; n];
            visited[c] = true;
            if reroute(
                displaced,
                freed,
                n,
                tight,
                &locked_col,
                c,
                &mut visited,
                &mut trial_perm,
                &mut trial_owner,
            ) {
                trial_perm[r] = c;
                trial_owner[c] = r;
                perm.copy_from_slice(&trial_perm);
                owner.copy_from_slice(&trial_owner);
                break;
            }
        }
        locked_col[perm[r]] = true;
    }
}

/// Builds a single `D`-cycle entry by entry in ascending cost order (ties by
/// row, then column), skipping entries whose row or column is taken or that
/// would close a cycle shorter than `D`.
pub fn greedy_single_cycle(cost: &DMatrix<f64>) -> AssignmentResult {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    if n <= 1 {
        let permutation = vec![0; n];
        return AssignmentResult {
            cost: total_cost(cost, &permutation),
            permutation,
            used_fallback: true,
        };
    }

    let mut entries: Vec<(usize, usize)> = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).collect();
    entries.sort_by(|&(r1, c1), &(r2, c2)| {
        cost[(r1, c1)]
            .total_cmp(&cost[(r2, c2)])
            .then(r1.cmp(&r2))
            .then(c1.cmp(&c2))
    });

    const NONE: usize = usize::MAX;
    let mut succ = vec![NONE; n];
    let mut has_pred = vec![false; n];
    // Path fragments: `head_of[tail]` and `tail_of[head]` for fragment ends.
    let mut head_of: Vec<usize> = (0..n).collect();
    let mut tail_of: Vec<usize> = (0..n).collect();
    let mut placed = 0;

    for &(r, c) in &entries {
        if succ[r] != NONE || has_pred[c] {
            continue;
        }
        // r is the tail of its fragment, c the head of its own.
        let closes = head_of[r] == c;
        if closes && placed + 1 < n {
            continue;
        }
        succ[r] = c;
        has_pred[c] = true;
        placed += 1;
        if placed == n {
            break;
        }
        let head = head_of[r];
        let tail = tail_of[c];
        tail_of[head] = tail;
        head_of[tail] = head;
    }
    debug_assert_eq!(placed, n);

    AssignmentResult {
        cost: total_cost(cost, &succ),
        permutation: succ,
        used_fallback: true,
    }
}
