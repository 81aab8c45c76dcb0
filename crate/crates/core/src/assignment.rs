//! Exact linear assignment.
//!
//! Every empirical rank and signed-rank map is the solution of a square
//! assignment problem over a dense cost matrix. The solver is the
//! shortest-augmenting-path method with dual potentials (Jonker–Volgenant
//! family): rows are inserted one at a time and each insertion runs a
//! Dijkstra-like search over reduced costs. Worst case is `O(n³)`.
//!
//! The result is exactly optimal for the computed `f64` costs; there are no
//! tolerances inside the solver. When several permutations are optimal the
//! first one reached by the deterministic search is returned. For data with
//! a continuous law such ties have probability zero.

use crate::error::{Error, Result};

/// Square matrix of finite, nonnegative costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Vec<f64>,
    n: usize,
}

impl CostMatrix {
    pub fn new(entries: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("cost matrix must have at least one row"));
        }
        if entries.len() != n * n {
            return Err(Error::invalid(format!(
                "cost matrix is not square: {} entries for n = {n}",
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid(format!(
                "cost ({}, {}) = {} is not finite and nonnegative",
                k / n,
                k % n,
                entries[k]
            )));
        }
        Ok(Self { entries, n })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::invalid(format!(
                    "cost matrix is not square: row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            entries.extend_from_slice(r);
        }
        Self::new(entries, n)
    }

    /// Fills `C[i][j] = cost(i, j)` row by row.
    pub fn from_fn(n: usize, cost: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(cost(i, j));
            }
        }
        Self::new(entries, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn transpose(&self) -> CostMatrix {
        let n = self.n;
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = self.entries[i * n + j];
            }
        }
        CostMatrix { entries: t, n }
    }
}

/// A solved assignment: row `i` is matched to column `permutation[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    /// `inverse[j]` is the row matched to column `j`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (i, &j) in self.permutation.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }
}

/// Minimum-cost perfect matching of rows to columns.
pub fn solve_assignment(costs: &CostMatrix) -> Assignment {
    let n = costs.n;
    let a = &costs.entries;
    // 1-based indexing with a virtual column 0 holding the row being inserted.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![f64::INFINITY; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let row = &a[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - ui0 - v[j];
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
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        // Flip the augmenting path back to the virtual column.
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut permutation = vec![0usize; n];
    for j in 1..=n {
        permutation[col_row[j] - 1] = j - 1;
    }
    let total_cost = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| a[i * n + j])
        .sum();
    Assignment {
        permutation,
        total_cost,
    }
}

/// Assignment for costs of the form `(s_i - t_j)²` on scalars.
///
/// By the rearrangement inequality the sorted matching is optimal, so this
/// runs in `O(n log n)`. Ties in the keys are broken by index, which keeps
/// the result deterministic.
pub fn solve_sorted_matching(row_keys: &[f64], col_keys: &[f64]) -> Result<Assignment> {
    if row_keys.len() != col_keys.len() {
        return Err(Error::invalid(format!(
            "cannot match {} rows to {} columns",
            row_keys.len(),
            col_keys.len()
        )));
    }
    let order = |keys: &[f64]| {
        let mut idx: Vec<usize> = (0..keys.len()).collect();
        idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
        idx
    };
    let rows = order(row_keys);
    let cols = order(col_keys);
    let mut permutation = vec![0usize; rows.len()];
    for (&r, &c) in rows.iter().zip(&cols) {
        permutation[r] = c;
    }
    let total_cost = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| (row_keys[i] - col_keys[j]).powi(2))
        .sum();
    Ok(Assignment {
        permutation,
        total_cost,
    })
}
