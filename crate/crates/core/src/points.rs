//! Dense row-major storage for samples and reference grids.

use crate::error::{Error, Result};

/// An `n × p` matrix of observations, one row per point.
///
/// Rows are contiguous so the inner loops of cost and kernel evaluations
/// walk memory linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    data: Vec<f64>,
    n: usize,
    p: usize,
}

/// Observed data. Same storage as a grid; the alias documents intent.
pub type Sample = Points;

impl Points {
    pub fn new(data: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if data.len() != n * p {
            return Err(Error::invalid(format!(
                "buffer of length {} cannot hold {n}x{p} points",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        Ok(Self { data, n, p })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.is_empty() {
            return Err(Error::invalid("no rows"));
        }
        let mut data = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::invalid(format!(
                    "row {i} has {} columns, expected {p}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, rows.len(), p)
    }

    /// Builds without validation; callers guarantee finiteness and shape.
    pub(crate) fn from_raw(data: Vec<f64>, n: usize, p: usize) -> Self {
        debug_assert_eq!(data.len(), n * p);
        Self { data, n, p }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows stacked: `self` on top of `other`.
    pub fn vstack(&self, other: &Points) -> Result<Points> {
        if self.p != other.p {
            return Err(Error::invalid(format!(
                "cannot stack dimension {} on dimension {}",
                self.p, other.p
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Points::from_raw(data, self.n + other.n, self.p))
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> Points {
        let mut data = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Points::from_raw(data, idx.len(), self.p)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        let n = self.n as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Index pair of the first two identical rows, if any.
    pub fn find_duplicate_rows(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| {
            self.row(a)
                .iter()
                .zip(self.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        order
            .windows(2)
            .find(|w| self.row(w[0]) == self.row(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
