//! One-to-one assignment of rows (tracks) to columns (detections).
//!
//! An entry is admissible when it is finite and `<= gate`. Both solvers
//! only ever pair admissible entries. [`optimal_assignment`] first
//! maximizes the number of pairs and then minimizes their summed cost.

use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, column)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unassigned_rows: Vec<usize>,
    pub unassigned_cols: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    fn from_pairs(cost: &[Vec<f64>], cols: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let mut row_used = vec![false; cost.len()];
        let mut col_used = vec![false; cols];
        let mut total_cost = 0.0;
        for &(r, c) in &pairs {
            row_used[r] = true;
            col_used[c] = true;
            total_cost += cost[r][c];
        }
        Self {
            pairs,
            unassigned_rows: (0..cost.len()).filter(|&r| !row_used[r]).collect(),
            unassigned_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
            total_cost,
        }
    }

    /// Recomputes unassigned columns for a matrix known to have `cols`
    /// columns; an empty cost matrix carries no column count itself.
    pub(crate) fn with_cols(mut self, cols: usize) -> Self {
        let mut used = vec![false; cols];
        for &(_, c) in &self.pairs {
            used[c] = true;
        }
        self.unassigned_cols = (0..cols).filter(|&c| !used[c]).collect();
        self
    }

    /// Column assigned to `row`, if any.
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

fn admissible(v: f64, gate: f64) -> bool {
    v.is_finite() && v <= gate
}

fn num_cols(cost: &[Vec<f64>]) -> usize {
    let cols = cost.first().map_or(0, Vec::len);
    assert!(
        cost.iter().all(|r| r.len() == cols),
        "cost matrix rows must have equal length"
    );
    cols
}

/// Greedy global nearest neighbour: repeatedly takes the cheapest remaining
/// admissible entry. Equal costs are resolved by `(row_keys[row], column)`.
pub fn greedy_assignment_keyed(cost: &[Vec<f64>], gate: f64, row_keys: &[u64]) -> Assignment {
    let cols = num_cols(cost);
    assert_eq!(row_keys.len(), cost.len());
    let mut edges: Vec<(f64, u64, usize, usize)> = cost
        .iter()
        .enumerate()
        .flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| admissible(**v, gate))
                .map(move |(c, v)| (*v, row_keys[r], c, r))
        })
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row_used = vec![false; cost.len()];
    let mut col_used = vec![false; cols];
    let mut pairs = Vec::new();
    for (_, _, c, r) in edges {
        if !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            pairs.push((r, c));
        }
    }
    Assignment::from_pairs(cost, cols, pairs)
}

/// Greedy assignment with rows keyed by their index.
pub fn greedy_assignment(cost: &[Vec<f64>], gate: f64) -> Assignment {
    let keys: Vec<u64> = (0..cost.len() as u64).collect();
    greedy_assignment_keyed(cost, gate, &keys)
}

/// Hungarian algorithm (shortest augmenting paths with potentials, O(n³)).
///
/// The matrix is padded to square with zero-cost dummies and inadmissible
/// entries get a penalty larger than any feasible sum of admissible costs,
/// so the solver never trades a real pair for a cheaper total.
pub fn optimal_assignment(cost: &[Vec<f64>], gate: f64) -> Assignment {
    let rows = cost.len();
    let cols = num_cols(cost);
    let n = rows.max(cols);
    if rows == 0 || cols == 0 {
        return Assignment::from_pairs(cost, cols, Vec::new());
    }
    let spread: f64 = cost
        .iter()
        .flatten()
        .filter(|v| admissible(**v, gate))
        .map(|v| v.abs())
        .sum();
    let penalty = 2.0 * spread + 1.0;
    let entry = |r: usize, c: usize| -> f64 {
        if r >= rows || c >= cols {
            0.0
        } else if admissible(cost[r][c], gate) {
            cost[r][c]
        } else {
            penalty
        }
    };

    // 1-based potentials; p[j] is the row matched to column j, 0 = none
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut p = vec![0_usize; n + 1];
    let mut way = vec![0_usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = entry(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j].total_cmp(&delta) == Ordering::Less {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let pairs = (1..=n)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .filter(|&(r, c)| r < rows && c < cols && admissible(cost[r][c], gate))
        .collect();
    Assignment::from_pairs(cost, cols, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search: most pairs first, then least cost.
    fn brute_force(cost: &[Vec<f64>], gate: f64) -> (usize, f64) {
        fn go(
            cost: &[Vec<f64>],
            gate: f64,
            row: usize,
            used: &mut Vec<bool>,
            count: usize,
            sum: f64,
            best: &mut (usize, f64),
        ) {
            if row == cost.len() {
                if count > best.0 || (count == best.0 && sum < best.1) {
                    *best = (count, sum);
                }
                return;
            }
            go(cost, gate, row + 1, used, count, sum, best);
            for c in 0..used.len() {
                if !used[c] && admissible(cost[row][c], gate) {
                    used[c] = true;
                    go(cost, gate, row + 1, used, count + 1, sum + cost[row][c], best);
                    used[c] = false;
                }
            }
        }
        let cols = cost.first().map_or(0, Vec::len);
        let mut best = (0, f64::INFINITY);
        go(cost, gate, 0, &mut vec![false; cols], 0, 0.0, &mut best);
        if best.0 == 0 {
            best.1 = 0.0;
        }
        best
    }

    #[test]
    fn diagonal_optimum() {
        let a = optimal_assignment(&[vec![1.0, 2.0], vec![2.0, 1.0]], f64::INFINITY);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost, 2.0);
    }

    #[test]
    fn optimal_beats_greedy() {
        let cost = [vec![1.0, 2.0], vec![1.0, 100.0]];
        let opt = optimal_assignment(&cost, f64::INFINITY);
        assert_eq!(opt.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(opt.total_cost, 3.0);
        let greedy = greedy_assignment(&cost, f64::INFINITY);
        assert_eq!(greedy.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(greedy.total_cost, 101.0);
    }

    #[test]
    fn everything_gated_out() {
        let cost = [vec![5.0, 6.0], vec![7.0, 8.0]];
        for a in [optimal_assignment(&cost, 1.0), greedy_assignment(&cost, 1.0)] {
            assert!(a.pairs.is_empty());
            assert_eq!(a.unassigned_rows, vec![0, 1]);
            assert_eq!(a.unassigned_cols, vec![0, 1]);
            assert_eq!(a.total_cost, 0.0);
        }
    }

    #[test]
    fn rectangular_and_empty() {
        let cost = [vec![3.0, 1.0, 2.0]];
        assert_eq!(optimal_assignment(&cost, 10.0).pairs, vec![(0, 1)]);
        let tall = [vec![3.0], vec![1.0], vec![2.0]];
        let a = optimal_assignment(&tall, 10.0);
        assert_eq!(a.pairs, vec![(1, 0)]);
        assert_eq!(a.unassigned_rows, vec![0, 2]);
        assert!(optimal_assignment(&[], 1.0).pairs.is_empty());
        let no_cols: Vec<Vec<f64>> = vec![vec![], vec![]];
        assert_eq!(optimal_assignment(&no_cols, 1.0).unassigned_rows, vec![0, 1]);
    }

    #[test]
    fn gating_prefers_more_pairs() {
        // the cheap (0,0) pair would strand row 1
        let cost = [vec![1.0, 4.0], vec![2.0, f64::INFINITY]];
        let a = optimal_assignment(&cost, 5.0);
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn greedy_ties_use_row_keys() {
        let cost = [vec![1.0], vec![1.0]];
        assert_eq!(greedy_assignment_keyed(&cost, 2.0, &[9, 4]).pairs, vec![(1, 0)]);
        assert_eq!(greedy_assignment_keyed(&cost, 2.0, &[4, 9]).pairs, vec![(0, 0)]);
    }

    fn matrix(max: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, f64)> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.0f64..20.0, c), r),
                prop_oneof![Just(f64::INFINITY), 2.0f64..15.0],
            )
        })
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force((cost, gate) in matrix(6)) {
            let a = optimal_assignment(&cost, gate);
            let (count, sum) = brute_force(&cost, gate);
            prop_assert_eq!(a.pairs.len(), count);
            prop_assert!((a.total_cost - sum).abs() <= 1e-9 * sum.max(1.0));
            for &(r, c) in &a.pairs {
                prop_assert!(cost[r][c] <= gate);
            }
        }

        #[test]
        fn optimal_never_costs_more_than_greedy((cost, gate) in matrix(6)) {
            let opt = optimal_assignment(&cost, gate);
            let greedy = greedy_assignment(&cost, gate);
            prop_assert!(greedy.pairs.len() <= opt.pairs.len());
            if greedy.pairs.len() == opt.pairs.len() {
                prop_assert!(opt.total_cost <= greedy.total_cost + 1e-9);
            }
        }
    }
}
