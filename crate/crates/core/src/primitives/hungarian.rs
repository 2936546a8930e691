//! Rectangular minimum-cost assignment (Kuhn-Munkres with potentials).

use serde::{Deserialize, Serialize};

/// Dense row-major cost matrix. Rows are previous items, columns current ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, cells: Vec<f64>) -> Self {
        assert_eq!(cells.len(), rows * cols, "cost matrix shape");
        assert!(cells.iter().all(|c| c.is_finite()), "cost matrix cells must be finite");
        Self { rows, cols, cells }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut cells = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                cells.push(f(i, j));
            }
        }
        Self::new(rows, cols, cells)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.cols + j]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, c: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| c.get(i, j)).sum()
    }

    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

/// Minimum-cost one-to-one matching of size `min(rows, cols)`.
///
/// The matrix is padded to square with a sentinel cost of `10 * max + 1`;
/// pairs landing on padding are reported unmatched. Ties resolve toward the
/// lowest row, then lowest column.
pub fn hungarian(c: &CostMatrix) -> Assignment {
    if c.is_empty() {
        return Assignment {
            pairs: Vec::new(),
            unmatched_rows: (0..c.rows).collect(),
            unmatched_cols: (0..c.cols).collect(),
        };
    }
    let n = c.rows.max(c.cols);
    let max = c.cells.iter().copied().fold(0.0_f64, f64::max);
    let sentinel = 10.0 * max + 1.0;
    let cost = |i: usize, j: usize| {
        if i < c.rows && j < c.cols {
            c.get(i, j)
        } else {
            sentinel
        }
    };

    // 1-based potentials formulation; column 0 is a virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![usize::MAX; n];
    for j in 1..=n {
        if row_of_col[j] > 0 {
            col_of_row[row_of_col[j] - 1] = j - 1;
        }
    }
    let mut out = Assignment::default();
    let mut col_used = vec![false; c.cols];
    for (i, &j) in col_of_row.iter().enumerate().take(c.rows) {
        if j < c.cols {
            out.pairs.push((i, j));
            col_used[j] = true;
        } else {
            out.unmatched_rows.push(i);
        }
    }
    out.unmatched_cols = (0..c.cols).filter(|&j| !col_used[j]).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive minimum over all injective row/col matchings of size min(rows, cols).
    pub(crate) fn brute_force_min(c: &CostMatrix) -> f64 {
        fn rec(c: &CostMatrix, transpose: bool, k: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let (short, long) = if transpose {
                (c.cols(), c.rows())
            } else {
                (c.rows(), c.cols())
            };
            if k == short {
                *best = best.min(acc);
                return;
            }
            for j in 0..long {
                if !used[j] {
                    used[j] = true;
                    let v = if transpose { c.get(j, k) } else { c.get(k, j) };
                    rec(c, transpose, k + 1, used, acc + v, best);
                    used[j] = false;
                }
            }
        }
        let transpose = c.rows() > c.cols();
        let long = c.rows().max(c.cols());
        let mut best = f64::INFINITY;
        rec(c, transpose, 0, &mut vec![false; long], 0.0, &mut best);
        if best.is_infinite() {
            0.0
        } else {
            best
        }
    }

    fn check_partition(a: &Assignment, rows: usize, cols: usize) {
        let mut rs: Vec<usize> = a
            .pairs
            .iter()
            .map(|p| p.0)
            .chain(a.unmatched_rows.iter().copied())
            .collect();
        let mut cs: Vec<usize> = a
            .pairs
            .iter()
            .map(|p| p.1)
            .chain(a.unmatched_cols.iter().copied())
            .collect();
        rs.sort_unstable();
        cs.sort_unstable();
        assert_eq!(rs, (0..rows).collect::<Vec<_>>());
        assert_eq!(cs, (0..cols).collect::<Vec<_>>());
        assert_eq!(a.pairs.len(), rows.min(cols));
    }

    #[test]
    fn identity_like() {
        let c = CostMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let a = hungarian(&c);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(a.total_cost(&c), 0.0);
    }

    #[test]
    fn three_by_three_against_permutations() {
        let c = CostMatrix::from_rows(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]]);
        assert_eq!(brute_force_min(&c), 5.0);
        assert_eq!(hungarian(&c).total_cost(&c), 5.0);
    }

    #[test]
    fn rectangular_shapes() {
        let c = CostMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]]);
        let a = hungarian(&c);
        assert_eq!(a.pairs.len(), 2);
        assert_eq!(a.unmatched_cols.len(), 1);
        check_partition(&a, 2, 3);

        let t = CostMatrix::from_fn(3, 2, |i, j| c.get(j, i));
        let a = hungarian(&t);
        assert_eq!(a.unmatched_rows.len(), 1);
        check_partition(&a, 3, 2);
    }

    #[test]
    fn empty_sides() {
        let a = hungarian(&CostMatrix::new(0, 3, vec![]));
        assert_eq!(a.unmatched_cols, vec![0, 1, 2]);
        let a = hungarian(&CostMatrix::new(2, 0, vec![]));
        assert_eq!(a.unmatched_rows, vec![0, 1]);
    }

    #[test]
    fn all_equal_costs_pick_lowest_indices() {
        let c = CostMatrix::from_fn(3, 3, |_, _| 1.0);
        assert_eq!(hungarian(&c).pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    fn matrix() -> impl Strategy<Value = CostMatrix> {
        (0usize..=6, 0usize..=6).prop_flat_map(|(r, c)| {
            prop::collection::vec(0u32..50, r * c)
                .prop_map(move |v| CostMatrix::new(r, c, v.into_iter().map(f64::from).collect()))
        })
    }

    proptest! {
        #[test]
        fn optimal_and_partitioning(c in matrix()) {
            let a = hungarian(&c);
            check_partition(&a, c.rows(), c.cols());
            prop_assert_eq!(a.total_cost(&c), brute_force_min(&c));
        }

        #[test]
        fn invariant_under_row_and_column_shifts(c in matrix(), k in 0u32..100, pick in 0usize..6, by_row in any::<bool>()) {
            prop_assume!(!c.is_empty());
            let base = hungarian(&c).total_cost(&c);
            let shifted = if by_row {
                let r = pick % c.rows();
                CostMatrix::from_fn(c.rows(), c.cols(), |i, j| c.get(i, j) + if i == r { k as f64 } else { 0.0 })
            } else {
                let col = pick % c.cols();
                CostMatrix::from_fn(c.rows(), c.cols(), |i, j| c.get(i, j) + if j == col { k as f64 } else { 0.0 })
            };
            let a = hungarian(&shifted);
            // Shifting a whole row/column moves the optimum by k only if that
            // row/column is necessarily matched; compare on the original costs.
            prop_assert_eq!(a.total_cost(&shifted), brute_force_min(&shifted));
            if (by_row && c.rows() <= c.cols()) || (!by_row && c.cols() <= c.rows()) {
                prop_assert_eq!(a.total_cost(&c), base);
            }
        }
    }
}
