//! Square sparse matrices in compressed-row form.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("entry ({row}, {col}) lies outside a {dim}x{dim} matrix")]
    OutOfRange { row: usize, col: usize, dim: usize },
    #[error("entry ({row}, {col}) is not finite: {value}")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("matrix is not square: row {row} has {len} entries, expected {dim}")]
    NotSquare { row: usize, len: usize, dim: usize },
}

/// Square matrix with 0-based indices, stored row-major in CSR layout.
/// Explicit zeros are dropped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, MatrixError> {
        let mut map = BTreeMap::new();
        for (row, col, value) in triplets {
            if row >= dim || col >= dim {
                return Err(MatrixError::OutOfRange { row, col, dim });
            }
            if !value.is_finite() {
                return Err(MatrixError::NonFinite { row, col, value });
            }
            *map.entry((row, col)).or_insert(0.0) += value;
        }
        Ok(Self::from_sorted(dim, map.into_iter().filter(|&(_, v)| v != 0.0)))
    }

    fn from_sorted(dim: usize, entries: impl Iterator<Item = ((usize, usize), f64)>) -> Self {
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for ((r, c), v) in entries {
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let dim = rows.len();
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(MatrixError::NotSquare { row: r, len: row.len(), dim });
            }
            triplets.extend(row.iter().enumerate().map(|(c, &v)| (r, c, v)));
        }
        Self::from_triplets(dim, triplets)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_sorted(dim, (0..dim).map(|i| ((i, i), 1.0)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_sorted(dim, std::iter::empty())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(i) => self.vals[range.start + i],
            Err(_) => 0.0,
        }
    }

    /// Nonzero entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |i| (r, self.cols[i], self.vals[i]))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut entries: Vec<_> = self.triplets().map(|(r, c, v)| ((c, r), v)).collect();
        entries.sort_by_key(|&(k, _)| k);
        Self::from_sorted(self.dim, entries.into_iter())
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Largest absolute row sum: the `l_inf -> l_inf` operator norm.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.vals[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute column sum: the `l_1 -> l_1` operator norm.
    pub fn max_abs_col_sum(&self) -> f64 {
        let mut sums = vec![0.0; self.dim];
        for (_, c, v) in self.triplets() {
            sums[c] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// `out = self * x`; both slices have length `dim`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[i] * x[self.cols[i]];
            }
            *o = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `x^T * self`, i.e. the transpose applied to `x`.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (r, c, v) in self.triplets() {
            out[c] += v * x[r];
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut entries = Vec::new();
        let mut acc = vec![0.0; self.dim];
        let mut touched = vec![false; self.dim];
        for r in 0..self.dim {
            let mut cols = Vec::new();
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (k, a) = (self.cols[i], self.vals[i]);
                for j in other.row_ptr[k]..other.row_ptr[k + 1] {
                    let c = other.cols[j];
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * other.vals[j];
                }
            }
            cols.sort_unstable();
            for c in cols {
                if acc[c] != 0.0 {
                    entries.push(((r, c), acc[c]));
                }
                acc[c] = 0.0;
                touched[c] = false;
            }
        }
        Self::from_sorted(self.dim, entries.into_iter())
    }

    /// `sum_i w_i * m_i` over matrices of equal dimension.
    pub fn weighted_sum(dim: usize, terms: &[(f64, Self)]) -> Self {
        let mut map = BTreeMap::new();
        for (w, m) in terms {
            assert_eq!(m.dim, dim, "dimension mismatch");
            for (r, c, v) in m.triplets() {
                *map.entry((r, c)).or_insert(0.0) += w * v;
            }
        }
        Self::from_sorted(dim, map.into_iter().filter(|&(_, v)| v != 0.0))
    }

    /// Top-left `dim x dim` block, zero padded when growing.
    pub fn resized(&self, dim: usize) -> Self {
        Self::from_sorted(dim, self.triplets().filter(|&(r, c, _)| r < dim && c < dim).map(|(r, c, v)| ((r, c), v)))
    }

    pub fn pow(&self, mut exponent: u32) -> Self {
        let mut result = Self::identity(self.dim);
        let mut base = self.clone();
        while exponent > 0 {
            if exponent & 1 == 1 {
                result = result.matmul(&base);
            }
            exponent >>= 1;
            if exponent > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }
}
