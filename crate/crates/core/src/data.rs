//! Dense row-major observation matrix.

use crate::error::{Error, Result};

/// `n` observations of `p` real features, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    p: usize,
}

impl DataMatrix {
    /// Builds a matrix from row-major values. Requires `n >= 2`, `p >= 1`
    /// and finite entries.
    pub fn new(values: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::ShapeMismatch(
                "data must have at least one feature".into(),
            ));
        }
        if values.len() != n * p {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                values.len()
            )));
        }
        if n < 2 {
            return Err(Error::DegenerateData(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::DataParse {
                row: pos / p,
                column: pos % p,
                message: "non-finite value".into(),
            });
        }
        Ok(Self { values, n, p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::ShapeMismatch(format!(
                "row {bad} has {} columns, expected {p}",
                rows[bad].len()
            )));
        }
        Self::new(rows.concat(), rows.len(), p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.p)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Replaces column `j` in place.
    pub(crate) fn set_column(&mut self, j: usize, col: &[f64]) {
        for (i, v) in col.iter().enumerate() {
            self.values[i * self.p + j] = *v;
        }
    }

    /// Returns a copy with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..*self
        }
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_euclidean(self.row(i), self.row(j))
    }
}

#[inline]
pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric matrix of squared Euclidean distances between all observations.
///
/// Computed once and shared by kernel construction, bandwidth estimation and
/// Voronoi assignment.
#[derive(Debug, Clone)]
pub struct SquaredDistances {
    n: usize,
    d: Vec<f64>,
}

impl SquaredDistances {
    pub fn new(data: &DataMatrix) -> Self {
        let n = data.n();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = data.sq_dist(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}
