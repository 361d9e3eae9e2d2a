//! Minimum-cost bipartite assignment with support for forbidden pairs.
//!
//! The solver maximises matching cardinality over the admissible subgraph
//! first and minimises total cost among matchings of that cardinality,
//! which is the behaviour evaluation code needs: every admissible pairing
//! that can be made, is made.

/// Marks a pair that must never be matched.
pub const FORBIDDEN: f64 = f64::INFINITY;

// Any admissible total cost is far below a single sentinel, so minimising
// with the sentinel in place maximises cardinality first. Kept small enough
// that mixing sentinel and real costs loses no meaningful precision.
const BIG: f64 = 1e9;

/// A matching as `(row, col)` pairs, sorted by row.
pub type Matching = Vec<(usize, usize)>;

/// Solves the rectangular assignment problem for `costs[row][col]`.
///
/// Entries set to `f64::INFINITY` (see [`FORBIDDEN`]) are never matched.
/// Returns the maximum-cardinality matching of minimum total cost over the
/// remaining pairs; rows or columns left over in a rectangular instance
/// stay unmatched. Finite costs must not be NaN.
pub fn assignment(costs: &[Vec<f64>]) -> Matching {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    debug_assert!(costs.iter().all(|r| r.len() == cols), "ragged cost matrix");

    // Solve with rows as the smaller side; transpose if needed.
    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| -> f64 {
        let c = if transposed { costs[j][i] } else { costs[i][j] };
        if c.is_finite() {
            c
        } else {
            BIG
        }
    };

    // Shortest augmenting path with potentials, O(n^2 m).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut matched_row = vec![0usize; m + 1]; // 1-based row matched to column j; 0 = free
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = Vec::new();
    for j in 1..=m {
        let i = matched_row[j];
        if i == 0 {
            continue;
        }
        let (row, col) = if transposed { (j - 1, i - 1) } else { (i - 1, j - 1) };
        let c = if transposed { costs[j - 1][i - 1] } else { costs[i - 1][j - 1] };
        if c.is_finite() {
            out.push((row, col));
        }
    }
    out.sort_unstable();
    out
}

/// Total cost of a matching over `costs`.
pub fn matching_cost(costs: &[Vec<f64>], matching: &Matching) -> f64 {
    matching.iter().map(|&(i, j)| costs[i][j]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_admissible_pair() {
        let m = assignment(&[vec![3.0]]);
        assert_eq!(m, vec![(0, 0)]);
    }

    #[test]
    fn all_pairs_forbidden_gives_empty_matching() {
        let m = assignment(&[vec![FORBIDDEN, FORBIDDEN], vec![FORBIDDEN, FORBIDDEN]]);
        assert!(m.is_empty());
    }

    #[test]
    fn three_by_three_known_optimum() {
        let costs = vec![
            vec![2.0, 3.0, 3.0],
            vec![3.0, 2.0, 3.0],
            vec![3.0, 3.0, 2.0],
        ];
        let m = assignment(&costs);
        assert_eq!(m, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(matching_cost(&costs, &m), 6.0);
    }

    #[test]
    fn rectangular_leaves_rows_unmatched() {
        let costs = vec![vec![1.0, 2.0], vec![6.0, 5.0], vec![1.0, 1.0]];
        let m = assignment(&costs);
        assert_eq!(m.len(), 2);
        // Optimum pairs rows {0, 2} at cost 1 + 1 = 2 (row 0 -> col 0, row 2 -> col 1).
        assert_eq!(matching_cost(&costs, &m), 2.0);
    }

    #[test]
    fn forbidden_entries_reduce_cardinality() {
        let costs = vec![vec![1.0, FORBIDDEN], vec![FORBIDDEN, FORBIDDEN]];
        let m = assignment(&costs);
        assert_eq!(m, vec![(0, 0)]);
    }

    #[test]
    fn prefers_cardinality_over_cost() {
        // Matching only (0,0) would cost 1, but the full matching is chosen
        // even though it costs 101.
        let costs = vec![vec![1.0, 100.0], vec![FORBIDDEN, 100.0]];
        let m = assignment(&costs);
        assert_eq!(m, vec![(0, 0), (1, 1)]);
        assert_eq!(matching_cost(&costs, &m), 101.0);
    }
}
