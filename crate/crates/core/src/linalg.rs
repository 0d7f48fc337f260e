//! Dense linear algebra used by the kernels and the greedy selector.
//!
//! Matrices are stored column-major in `f64`. Every reduction (dot products,
//! traces, log-determinant sums) goes through [`pairwise_sum`] / [`dot`] so
//! results do not depend on how callers split work across threads.

use std::ops::Index;

use crate::error::{check_len, Error, Result};

/// Leaf size below which pairwise summation falls back to a plain loop.
const PAIRWISE_BLOCK: usize = 16;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Inner product with the same pairwise reduction tree as [`pairwise_sum`].
///
/// Panics if the slices differ in length; use [`checked_dot`] for untrusted input.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    if a.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            acc += x * y;
        }
        acc
    } else {
        let mid = a.len() / 2;
        dot(&a[..mid], &b[..mid]) + dot(&a[mid..], &b[mid..])
    }
}

pub fn checked_dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(dot(a, b))
}

/// Squared Euclidean distance, pairwise-reduced.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "squared_distance: length mismatch");
    if a.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            acc += d * d;
        }
        acc
    } else {
        let mid = a.len() / 2;
        squared_distance(&a[..mid], &b[..mid]) + squared_distance(&a[mid..], &b[mid..])
    }
}

/// Column-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Wraps column-major `data`. Rejects wrong lengths and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::new(n, n, data)
    }

    /// Builds a matrix from `f(row, col)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Stacks equal-length vectors as columns.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            let c = c.as_ref();
            check_len(rows, c.len())?;
            data.extend_from_slice(c);
        }
        Self::new(rows, columns.len(), data)
    }

    /// Row-major nested input, convenient for literals in tests.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        for r in rows {
            check_len(ncols, r.as_ref().len())?;
        }
        Self::from_fn(nrows, ncols, |i, j| rows[i].as_ref()[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major backing storage.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.cols).map(move |j| self.column(j))
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(row, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                data.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Selects a subset of columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for &j in indices {
            if j >= self.cols {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    len: self.cols,
                });
            }
            data.extend_from_slice(self.column(j));
        }
        Ok(Self {
            rows: self.rows,
            cols: indices.len(),
            data,
        })
    }

    /// Principal submatrix on `indices`.
    pub fn principal(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.rows.min(self.cols) {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.rows,
                });
            }
        }
        Self::from_fn(indices.len(), indices.len(), |a, b| {
            self.get(indices[a], indices[b])
        })
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        check_len(self.cols, rhs.rows)?;
        let lhs_t = self.transpose();
        Self::from_fn(self.rows, rhs.cols, |i, j| {
            dot(lhs_t.column(i), rhs.column(j))
        })
    }

    /// `selfᵀ · self`.
    pub fn gram_columns(&self) -> Self {
        let n = self.cols;
        let mut data = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..=j {
                let v = dot(self.column(i), self.column(j));
                data[j * n + i] = v;
                data[i * n + j] = v;
            }
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    /// `self · selfᵀ`.
    pub fn gram_rows(&self) -> Self {
        self.transpose().gram_columns()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// `I + c·self` for a square matrix.
    pub fn eye_plus_scaled(&self, c: f64) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        let mut out = self.scale(c);
        for i in 0..n {
            out.data[i * n + i] += 1.0;
        }
        Ok(out)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn trace(&self) -> f64 {
        pairwise_sum(&self.diag())
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// Largest absolute asymmetry `|a_ij − a_ji|`, with its position.
    pub fn max_asymmetry(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for j in 0..self.cols {
            for i in 0..j {
                let gap = (self.get(i, j) - self.get(j, i)).abs();
                if gap > worst.2 {
                    worst = (i, j, gap);
                }
            }
        }
        worst
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let (row, col, gap) = self.max_asymmetry();
        if gap > tol {
            return Err(Error::NotSymmetric { row, col, gap });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (row, col): (usize, usize)) -> &f64 {
        &self.data[col * self.rows + row]
    }
}

/// Absolute tolerance for the symmetry precondition of [`cholesky`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Lower Cholesky factor `L` with `L Lᵀ = A`, stored as packed rows so that
/// bordering by one row and column is an append.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    /// Row `i` occupies `packed[i(i+1)/2 .. (i+1)(i+2)/2]`.
    packed: Vec<f64>,
    logdet: f64,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl CholeskyFactor {
    /// Factor of the empty (0×0) matrix; log det is 0.
    pub fn empty() -> Self {
        Self {
            dim: 0,
            packed: Vec::new(),
            logdet: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `log det(L Lᵀ)`.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Row `i` of `L`, entries `0..=i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.packed[row_start(i)..row_start(i + 1)]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.packed[row_start(i) + j]
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
            .expect("factor entries are finite")
    }

    /// Forward substitution: solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, b.len())?;
        let mut y = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let row = self.row(i);
            let s = b[i] - dot(&row[..i], &y);
            y.push(s / row[i]);
        }
        Ok(y)
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.solve_lower(b)?;
        for i in (0..self.dim).rev() {
            let mut s = x[i];
            for k in i + 1..self.dim {
                s -= self.get(k, i) * x[k];
            }
            x[i] = s / self.get(i, i);
        }
        Ok(x)
    }

    /// Appends a precomputed row `[row, pivot]` to `L`.
    pub(crate) fn push_row(&mut self, row: &[f64], pivot: f64) -> Result<()> {
        check_len(self.dim, row.len())?;
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: self.dim,
                value: pivot,
            });
        }
        self.packed.extend_from_slice(row);
        self.packed.push(pivot);
        self.logdet += 2.0 * pivot.ln();
        self.dim += 1;
        Ok(())
    }

    /// Borders the factored matrix with `col` and `corner`, in place.
    pub fn extend_in_place(&mut self, col: &[f64], corner: f64) -> Result<()> {
        check_len(self.dim, col.len())?;
        let v = self.solve_lower(col)?;
        let schur = corner - dot(&v, &v);
        if schur <= 0.0 || !schur.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: self.dim,
                value: schur,
            });
        }
        let pivot = schur.sqrt();
        self.packed.extend_from_slice(&v);
        self.packed.push(pivot);
        self.logdet += 2.0 * pivot.ln();
        self.dim += 1;
        Ok(())
    }
}

/// Factors `A + jitter·I`.
///
/// `A` must be square and symmetric within [`SYMMETRY_TOL`]; only its lower
/// triangle is read.
pub fn cholesky(a: &DenseMatrix, jitter: f64) -> Result<CholeskyFactor> {
    if jitter < 0.0 || !jitter.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "jitter must be finite and nonnegative, got {jitter}"
        )));
    }
    a.check_symmetric(SYMMETRY_TOL)?;
    let n = a.rows();
    let mut factor = CholeskyFactor {
        dim: 0,
        packed: Vec::with_capacity(n * (n + 1) / 2),
        logdet: 0.0,
    };
    let mut col = Vec::with_capacity(n);
    for i in 0..n {
        col.clear();
        col.extend((0..i).map(|j| a.get(i, j)));
        factor.extend_in_place(&col, a.get(i, i) + jitter)?;
    }
    Ok(factor)
}

/// Retry jitter used by [`cholesky_with_retry`]: `1e-9 · trace(A) / dim`.
pub fn default_jitter(a: &DenseMatrix) -> f64 {
    if a.rows() == 0 {
        return 0.0;
    }
    (1e-9 * a.trace() / a.rows() as f64).abs()
}

/// Factors `A` as is, retrying once with [`default_jitter`] if a pivot fails.
pub fn cholesky_with_retry(a: &DenseMatrix) -> Result<CholeskyFactor> {
    match cholesky(a, 0.0) {
        Err(Error::NotPositiveDefinite { .. }) => {
            let jitter = default_jitter(a);
            log::debug!("cholesky failed without jitter, retrying with {jitter:e}");
            cholesky(a, jitter)
        }
        other => other,
    }
}

/// Returns a new factor of `[[A, col], [colᵀ, corner]]`.
pub fn cholesky_extend(
    factor: &CholeskyFactor,
    col: &[f64],
    corner: f64,
) -> Result<CholeskyFactor> {
    let mut out = factor.clone();
    out.extend_in_place(col, corner)?;
    Ok(out)
}

/// `log det(I + c·K)` for a symmetric PSD `K`.
pub fn logdet_eye_plus(c: f64, k: &DenseMatrix) -> Result<f64> {
    if c < 0.0 || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "coefficient must be finite and nonnegative, got {c}"
        )));
    }
    let m = k.eye_plus_scaled(c)?;
    Ok(cholesky_with_retry(&m)?.logdet())
}
