//! Column-major dense matrices and the handful of kernels the solvers need.
//!
//! All products are evaluated column by column with a fixed summation order,
//! so a column of a batch product is bit-identical to the same product taken
//! on that column alone.

use std::ops::{Index, IndexMut};

use crate::error::{check_shape, shape, Error, Result};

/// Real matrix stored in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "DenseMatrix::new",
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input; intended for
    /// literals in code and tests.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            assert_eq!(row.len(), ncols, "ragged row {i} in from_rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    /// Copy of column `j` as an `rows x 1` matrix.
    pub fn column(&self, j: usize) -> DenseMatrix {
        DenseMatrix::column_vector(self.col(j))
    }

    /// Copy of rows `start..end`.
    pub fn row_block(&self, start: usize, end: usize) -> DenseMatrix {
        DenseMatrix::from_fn(end - start, self.cols, |i, j| self[(start + i, j)])
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension {
                context: "matmul",
                expected: format!("{} rows on the right", self.cols),
                found: shape(rhs.rows, rhs.cols),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in rhs.col(j).iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                for (d, &a) in dst.iter_mut().zip(self.col(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * rhs` without forming the transpose.
    pub fn tr_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension {
                context: "tr_matmul",
                expected: format!("{} rows on the right", self.rows),
                found: shape(rhs.rows, rhs.cols),
            });
        }
        Ok(DenseMatrix::from_fn(self.cols, rhs.cols, |i, j| {
            dot(self.col(i), rhs.col(j))
        }))
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with("add", rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with("sub", rhs, |a, b| a - b)
    }

    pub fn zip_with(
        &self,
        context: &'static str,
        rhs: &DenseMatrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseMatrix> {
        check_shape(context, self.shape(), rhs.shape())?;
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        self.map(|v| v * s)
    }

    /// `diag(w) * self`.
    pub fn scale_rows(&self, w: &[f64]) -> DenseMatrix {
        assert_eq!(w.len(), self.rows);
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| w[i] * self[(i, j)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entrywise ℓ1 norm (sum of absolute values of all entries).
    pub fn abs_sum(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks `self` on top of `below`.
    pub fn vstack(&self, below: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != below.cols {
            return Err(Error::Dimension {
                context: "vstack",
                expected: format!("{} columns", self.cols),
                found: shape(below.rows, below.cols),
            });
        }
        let rows = self.rows + below.rows;
        Ok(DenseMatrix::from_fn(rows, self.cols, |i, j| {
            if i < self.rows {
                self[(i, j)]
            } else {
                below[(i - self.rows, j)]
            }
        }))
    }

    /// Places `right` beside `self`.
    pub fn hstack(&self, right: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != right.rows {
            return Err(Error::Dimension {
                context: "hstack",
                expected: format!("{} rows", self.rows),
                found: shape(right.rows, right.cols),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&right.data);
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols + right.cols,
            data,
        })
    }

    /// Builds a batch from single-column matrices.
    pub fn from_columns(columns: &[DenseMatrix]) -> Result<DenseMatrix> {
        let rows = columns.first().map_or(0, |c| c.rows);
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            check_shape("from_columns", (rows, 1), c.shape())?;
            data.extend_from_slice(&c.data);
        }
        Ok(DenseMatrix {
            rows,
            cols: columns.len(),
            data,
        })
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scalar soft-thresholding: shrinks `v` toward zero by `kappa`.
#[inline]
pub fn soft(v: f64, kappa: f64) -> f64 {
    let a = v.abs();
    if a <= kappa {
        0.0
    } else {
        (a - kappa).copysign(v)
    }
}

/// Elementwise soft-thresholding of `v` with per-entry thresholds `kappa`.
pub fn soft_threshold(v: &DenseMatrix, kappa: &DenseMatrix) -> Result<DenseMatrix> {
    v.zip_with("soft_threshold", kappa, soft)
}

/// Cholesky factor `M = L Lᵀ` of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    dim: usize,
    // lower triangle, column-major
    lower: Vec<f64>,
}

/// Relative pivot tolerance: a pivot at or below this fraction of its own
/// diagonal entry is rejected. The ratio is unchanged by symmetric diagonal
/// scaling, so a badly scaled but well-posed matrix still factors.
pub const SPD_PIVOT_TOL: f64 = 1e-12;

pub fn spd_factorize(m: &DenseMatrix) -> Result<SpdFactorization> {
    let n = m.rows();
    check_shape("spd_factorize", (n, n), m.shape())?;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[k * n + j] * l[k * n + j];
        }
        if !(d > SPD_PIVOT_TOL * m[(j, j)]) || !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[k * n + i] * l[k * n + j];
            }
            l[j * n + i] = s / djj;
        }
    }
    Ok(SpdFactorization { dim: n, lower: l })
}

impl SpdFactorization {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Solves in place for one right-hand side.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        let l = &self.lower;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[k * n + i] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= l[i * n + k] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
    }
}

pub fn spd_solve(f: &SpdFactorization, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows() != f.dim {
        return Err(Error::Dimension {
            context: "spd_solve",
            expected: format!("{} rows", f.dim),
            found: shape(b.rows(), b.cols()),
        });
    }
    let mut x = b.clone();
    for j in 0..x.cols() {
        f.solve_in_place(x.col_mut(j));
    }
    Ok(x)
}
