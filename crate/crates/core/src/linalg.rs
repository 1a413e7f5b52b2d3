//! Small dense linear algebra: just enough for mass-balance solves and
//! input-output inverses on networks of up to a few hundred nodes.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// y^T A, returned as a vector of length `cols`.
    pub fn vecmat(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += yi * a;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Max absolute entry of (self · other − I); diagnostic for inverse checks.
    pub fn product_identity_error(&self, other: &Matrix) -> f64 {
        let prod = self.matmul(other);
        let mut worst = 0.0f64;
        for i in 0..prod.rows {
            for j in 0..prod.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(math::abs(prod[(i, j)] - target));
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot} at column {col})")]
    Singular { col: usize, pivot: u64 },
    #[error("matrix is not positive definite (leading minor {0})")]
    NotPositiveDefinite(usize),
}

fn singular(col: usize, pivot: f64) -> LinalgError {
    LinalgError::Singular { col, pivot: pivot.to_bits() }
}

/// LU factorization with partial pivoting: P·A = L·U.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: Matrix,
    /// perm[i] = source row of factored row i.
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        assert_eq!(a.rows, a.cols, "LU requires a square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        let data = &mut lu.data;
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_val = math::abs(data[k * n + k]);
            for i in (k + 1)..n {
                let v = math::abs(data[i * n + k]);
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = i;
                }
            }
            if pivot_val < 1e-300 {
                return Err(singular(k, pivot_val));
            }
            if pivot_row != k {
                for j in 0..n {
                    data.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            // Row-slice elimination keeps the inner loop free of index
            // arithmetic and bounds checks.
            let (upper, lower) = data.split_at_mut((k + 1) * n);
            let pivot_row_data = &upper[k * n..(k + 1) * n];
            let pivot = pivot_row_data[k];
            for i in (k + 1)..n {
                let row = &mut lower[(i - k - 1) * n..(i - k) * n];
                let factor = row[k] / pivot;
                row[k] = factor;
                if factor == 0.0 {
                    continue;
                }
                for (r, &p) in row[k + 1..].iter_mut().zip(&pivot_row_data[k + 1..]) {
                    *r -= factor * p;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Solve A·x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let data = &self.lu.data;
        // Forward substitution on L (unit diagonal), applying P to b.
        let mut x: Vec<f64> = self.perm.iter().map(|&src| b[src]).collect();
        for i in 1..n {
            let row = &data[i * n..i * n + i];
            let mut acc = x[i];
            for (l, xv) in row.iter().zip(&x) {
                acc -= l * xv;
            }
            x[i] = acc;
        }
        // Back substitution on U.
        for i in (0..n).rev() {
            let row = &data[i * n..(i + 1) * n];
            let mut acc = x[i];
            for (u, xv) in row[i + 1..].iter().zip(&x[i + 1..]) {
                acc -= u * xv;
            }
            x[i] = acc / row[i];
        }
        x
    }

    /// Solve A^T·x = b using the same factors (A^T = U^T·L^T·P).
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        // Forward substitution on U^T (lower triangular, non-unit diagonal).
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.lu[(j, i)] * y[j];
            }
            y[i] = acc / self.lu[(i, i)];
        }
        // Back substitution on L^T (upper triangular, unit diagonal).
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in (i + 1)..n {
                acc -= self.lu[(j, i)] * y[j];
            }
            y[i] = acc;
        }
        // x = P^T y: factored row i came from source row perm[i].
        let mut x = vec![0.0; n];
        for (i, &src) in self.perm.iter().enumerate() {
            x[src] = y[i];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix, LinalgError> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite(i));
                }
                l[(i, j)] = math::sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Spectral-radius estimate of a non-negative matrix by power iteration,
/// using the geometric-mean growth rate (‖Aᵏ·1‖)^(1/k) so complex or
/// paired dominant eigenvalues do not make the estimate oscillate.
///
/// Returns 0 when the iterate collapses (nilpotent / acyclic case).
pub fn spectral_radius_nonneg(a: &Matrix, steps: usize) -> f64 {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 || steps == 0 {
        return 0.0;
    }
    let mut v = vec![1.0; n];
    let mut log_growth = 0.0;
    for step in 1..=steps {
        let w = a.matvec(&v);
        let norm = w.iter().copied().fold(0.0f64, |m, x| m.max(math::abs(x)));
        if norm <= 1e-300 {
            return 0.0;
        }
        log_growth += math::ln(norm);
        if step == steps {
            return math::exp(log_growth / steps as f64);
        }
        v = w.into_iter().map(|x| x / norm).collect();
    }
    unreachable!()
}
