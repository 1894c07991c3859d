//! Linear assignment: O(n³) Hungarian method with dual potentials, and a
//! lexicographic tie-break over all optimal assignments.

use nalgebra::DMatrix;

/// Optimal row → column assignment of a square cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub cost: f64,
    /// Row potentials; `u[i] + v[j] ≤ cost(i, j)` with equality on the assignment.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Minimum-cost assignment by shortest augmenting paths with potentials.
pub fn hungarian(cost: &DMatrix<f64>) -> Assignment {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square matrix");
    if n == 0 {
        return Assignment { row_to_col: Vec::new(), cost: 0.0, u: Vec::new(), v: Vec::new() };
    }
    // One-based working arrays; index 0 is the virtual root column.
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
                if !used[j] {
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
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[owner[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[(i, row_to_col[i])]).sum();
    Assignment { row_to_col, cost: total, u: u[1..].to_vec(), v: v[1..].to_vec() }
}

/// Lexicographically smallest `row_to_col` among all minimum-cost assignments.
///
/// Optimal assignments are exactly the perfect matchings on edges that are
/// tight under optimal potentials. Rows are fixed in order to the smallest
/// tight column for which the remaining rows can still be re-matched.
pub fn lex_min_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    let sol = hungarian(cost);
    let scale = cost.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-9 * scale;
    let tight = |i: usize, j: usize| cost[(i, j)] - sol.u[i] - sol.v[j] <= eps;

    let mut row_to_col = sol.row_to_col.clone();
    let mut col_to_row = vec![0; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    for i in 0..n {
        for j in 0..row_to_col[i] {
            // Columns held by fixed rows are never touched again.
            if col_to_row[j] < i || !tight(i, j) {
                continue;
            }
            // Re-route: row i takes j; the displaced row must reach i's old column.
            let target = row_to_col[i];
            let displaced = col_to_row[j];
            if let Some(path) = alternating_path(n, displaced, target, i, &row_to_col, &col_to_row, &tight, j) {
                for (r, c) in path {
                    row_to_col[r] = c;
                    col_to_row[c] = r;
                }
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
    }
    row_to_col
}

/// Breadth-first search for an alternating path that moves `start` onto a
/// tight column and ends by freeing `target` (re-matched along the path).
/// Rows `≤ fixed` and column `banned` are excluded. Returns the new
/// `(row, col)` pairs.
#[allow(clippy::too_many_arguments)]
fn alternating_path(
    n: usize,
    start: usize,
    target: usize,
    fixed: usize,
    row_to_col: &[usize],
    col_to_row: &[usize],
    tight: &dyn Fn(usize, usize) -> bool,
    banned: usize,
) -> Option<Vec<(usize, usize)>> {
    let mut parent_col: Vec<Option<usize>> = vec![None; n];
    let mut reached_from: Vec<Option<usize>> = vec![None; n];
    let mut queue = std::collections::VecDeque::from([start]);
    let mut seen_row = vec![false; n];
    seen_row[start] = true;
    while let Some(r) = queue.pop_front() {
        for c in 0..n {
            if c == banned || reached_from[c].is_some() || c == row_to_col[r] || !tight(r, c) {
                continue;
            }
            reached_from[c] = Some(r);
            if c == target {
                let mut path = Vec::new();
                let mut col = c;
                loop {
                    let row = reached_from[col].unwrap();
                    path.push((row, col));
                    match parent_col[row] {
                        Some(prev) => col = prev,
                        None => break,
                    }
                }
                return Some(path);
            }
            let next = col_to_row[c];
            if next > fixed && !seen_row[next] {
                seen_row[next] = true;
                parent_col[next] = Some(c);
                queue.push_back(next);
            }
        }
    }
    None
}

/// Perfect matching on a bipartite graph given by row adjacency lists.
pub fn perfect_matching(adj: &[Vec<usize>], ncols: usize) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut col_owner: Vec<Option<usize>> = vec![None; ncols];
    for r in 0..n {
        let mut seen = vec![false; ncols];
        if !augment(r, adj, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut row_to_col = vec![0; n];
    for (c, o) in col_owner.iter().enumerate() {
        if let Some(r) = o {
            row_to_col[*r] = c;
        }
    }
    Some(row_to_col)
}

fn augment(r: usize, adj: &[Vec<usize>], seen: &mut [bool], col_owner: &mut [Option<usize>]) -> bool {
    for &c in &adj[r] {
        if seen[c] {
            continue;
        }
        seen[c] = true;
        if col_owner[c].is_none_or(|o| augment(o, adj, seen, col_owner)) {
            col_owner[c] = Some(r);
            return true;
        }
    }
    false
}
