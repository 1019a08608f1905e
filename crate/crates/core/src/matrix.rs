//! Dense matrices over a [`Scalar`] field.
//!
//! Sizes here are tiny (the phase count, usually 2) except for the truncated
//! oracle systems, so everything is a plain row-major `Vec` with textbook
//! O(n³) kernels.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;
use crate::tolerances;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("singular matrix (pivot column {pivot_col})")]
    Singular { pivot_col: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },
    #[error("non-finite value encountered")]
    NonFinite,
}

#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    /// Builds a matrix from row-major entries.
    ///
    /// Panics if `data.len() != rows * cols` or a dimension is zero.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert_eq!(data.len(), rows * cols, "entry count does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(LinalgError::DimensionMismatch {
                op: "from_rows",
                left: (r, c),
                right: (r, c),
            });
        }
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(LinalgError::DimensionMismatch {
                op: "from_rows",
                left: (r, c),
                right: (1, bad.len()),
            });
        }
        Ok(Self::from_vec(r, c, rows.into_iter().flatten().collect()))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i].clone() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn map<U: Scalar>(&self, f: impl FnMut(&T) -> U) -> Mat<U> {
        Mat::from_vec(self.rows, self.cols, self.data.iter().map(f).collect())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "mul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] = out.data[idx].clone() + a.clone() * other.get(k, j).clone();
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip_with(other, "add", |a, b| a.clone() + b.clone())
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip_with(other, "sub", |a, b| a.clone() - b.clone())
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(&T, &T) -> T) -> Result<Self, LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect();
        Ok(Self::from_vec(self.rows, self.cols, data))
    }

    pub fn scale(&self, s: &T) -> Self {
        self.map(|v| v.clone() * s.clone())
    }

    /// `self · v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "vector length does not match columns");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    /// Row vector times matrix, `vᵀ · self`.
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows, "vector length does not match rows");
        let mut out = vec![T::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o = o.clone() + vi.clone() * a.clone();
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().cloned().fold(T::zero(), |a, b| a + b))
            .collect()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self.get(i, i).clone())
    }

    pub fn max_abs(&self) -> T {
        T::max_abs(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(Scalar::is_finite_value)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.try_sub(other).expect("shape mismatch in max_abs_diff").max_abs()
    }

    /// Equality for the exact backend; for floats, entrywise agreement up to
    /// `rel_tol` times the larger of the two max-entries.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        if self.shape() != other.shape() {
            return false;
        }
        let scale = {
            let (a, b) = (self.max_abs(), other.max_abs());
            if a > b {
                a
            } else {
                b
            }
        };
        self.max_abs_diff(other).is_negligible(&scale, rel_tol)
    }

    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs();
        (0..self.rows).all(|i| {
            (i + 1..self.cols).all(|j| {
                (self.get(i, j).clone() - self.get(j, i).clone()).is_negligible(&scale, tolerances::SYMMETRY_REL)
            })
        })
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting.
    ///
    /// Exact backend: singular iff a zero pivot remains. Float backend: a
    /// pivot below `1e-13 × max|entry|` is treated as zero.
    pub fn inverse(&self) -> Result<Self, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let scale = self.max_abs();
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| {
                    a.get(r1, col)
                        .abs()
                        .partial_cmp(&a.get(r2, col).abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty pivot range");
            let pivot = a.get(pivot_row, col).clone();
            if !pivot.is_finite_value() {
                return Err(LinalgError::NonFinite);
            }
            if pivot.is_zero() || pivot.is_negligible(&scale, tolerances::PIVOT_REL) {
                return Err(LinalgError::Singular { pivot_col: col });
            }
            a.swap_rows(col, pivot_row);
            inv.swap_rows(col, pivot_row);
            let p_inv = T::one() / pivot;
            a.scale_row(col, &p_inv);
            inv.scale_row(col, &p_inv);
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col).clone();
                if factor.is_zero() {
                    continue;
                }
                a.axpy_row(r, col, &factor);
                inv.axpy_row(r, col, &factor);
            }
        }
        Ok(inv)
    }

    /// Solves `self · x = b` for a single right-hand side.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        if b.len() != self.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "solve",
                left: self.shape(),
                right: (b.len(), 1),
            });
        }
        let n = self.rows;
        let scale = self.max_abs();
        let mut a = self.clone();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| {
                    a.get(r1, col)
                        .abs()
                        .partial_cmp(&a.get(r2, col).abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty pivot range");
            let pivot = a.get(pivot_row, col).clone();
            if pivot.is_zero() || pivot.is_negligible(&scale, tolerances::PIVOT_REL) {
                return Err(LinalgError::Singular { pivot_col: col });
            }
            a.swap_rows(col, pivot_row);
            rhs.swap(col, pivot_row);
            for r in col + 1..n {
                let factor = a.get(r, col).clone() / pivot.clone();
                if factor.is_zero() {
                    continue;
                }
                for j in col..n {
                    let v = a.get(r, j).clone() - factor.clone() * a.get(col, j).clone();
                    a.set(r, j, v);
                }
                rhs[r] = rhs[r].clone() - factor * rhs[col].clone();
            }
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut acc = rhs[i].clone();
            for j in i + 1..n {
                acc = acc - a.get(i, j).clone() * x[j].clone();
            }
            x[i] = acc / a.get(i, i).clone();
        }
        Ok(x)
    }

    pub fn determinant(&self) -> Result<T, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = T::one();
        for col in 0..n {
            let Some(pivot_row) = (col..n).find(|&r| !a.get(r, col).is_zero()) else {
                return Ok(T::zero());
            };
            if pivot_row != col {
                a.swap_rows(col, pivot_row);
                det = -det;
            }
            let pivot = a.get(col, col).clone();
            for r in col + 1..n {
                let factor = a.get(r, col).clone() / pivot.clone();
                for j in col..n {
                    let v = a.get(r, j).clone() - factor.clone() * a.get(col, j).clone();
                    a.set(r, j, v);
                }
            }
            det = det * pivot;
        }
        Ok(det)
    }

    /// Leading `k × k` block.
    pub fn leading(&self, k: usize) -> Self {
        Self::from_fn(k, k, |i, j| self.get(i, j).clone())
    }

    /// Positive definiteness of a symmetric matrix.
    ///
    /// Exact backend: every leading principal minor is positive. Float
    /// backend: every LDLᵀ pivot exceeds `1e-13 × trace`.
    pub fn is_positive_definite(&self) -> bool {
        if !self.is_symmetric() {
            return false;
        }
        if T::EXACT {
            (1..=self.rows).all(|k| self.leading(k).determinant().map(|d| d.is_positive()).unwrap_or(false))
        } else {
            self.ldlt().is_ok()
        }
    }

    /// Square-root-free factorization `self = L D Lᵀ` with `L` unit lower
    /// triangular.
    pub fn ldlt(&self) -> Result<Ldlt<T>, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        if !self.is_symmetric() {
            return Err(LinalgError::NotSymmetric);
        }
        let n = self.rows;
        let threshold = self.trace();
        let mut l = Self::identity(n);
        let mut d: Vec<T> = Vec::with_capacity(n);
        for j in 0..n {
            let mut dj = self.get(j, j).clone();
            for k in 0..j {
                let ljk = l.get(j, k).clone();
                dj = dj - ljk.clone() * ljk * d[k].clone();
            }
            if !dj.is_positive() || dj.is_negligible(&threshold, tolerances::PD_PIVOT_REL) {
                return Err(LinalgError::NotPositiveDefinite { index: j });
            }
            for i in j + 1..n {
                let mut v = self.get(i, j).clone();
                for k in 0..j {
                    v = v - l.get(i, k).clone() * l.get(j, k).clone() * d[k].clone();
                }
                l.set(i, j, v / dj.clone());
            }
            d.push(dj);
        }
        Ok(Ldlt { l, d })
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn scale_row(&mut self, r: usize, s: &T) {
        for j in 0..self.cols {
            let idx = r * self.cols + j;
            self.data[idx] = self.data[idx].clone() * s.clone();
        }
    }

    /// row[target] -= factor * row[source]
    fn axpy_row(&mut self, target: usize, source: usize, factor: &T) {
        for j in 0..self.cols {
            let v = self.get(target, j).clone() - factor.clone() * self.get(source, j).clone();
            self.set(target, j, v);
        }
    }
}

impl Mat<f64> {
    /// Upper-triangular `U` with `Uᵀ U = self`.
    pub fn cholesky(&self) -> Result<Self, LinalgError> {
        let Ldlt { l, d } = self.ldlt()?;
        let n = self.rows;
        let sqrt_d: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
        Ok(Self::from_fn(
            n,
            n,
            |i, j| if j >= i { l.get(j, i) * sqrt_d[i] } else { 0.0 },
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ldlt<T> {
    pub l: Mat<T>,
    pub d: Vec<T>,
}

impl<T: Scalar> Ldlt<T> {
    pub fn reconstruct(&self) -> Mat<T> {
        &(&self.l * &Mat::from_diagonal(&self.d)) * &self.l.transpose()
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols = self.cols.max(1);
        f.debug_list().entries(self.data.chunks(cols).take(self.rows)).finish()
    }
}

impl<T: fmt::Display> fmt::Display for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for (j, v) in self.data[i * self.cols..(i + 1) * self.cols].iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{v}")?;
            }
        }
        write!(f, "]")
    }
}

// Operator forms panic on shape mismatch; use the `try_*` methods when the
// shapes come from untrusted input.

impl<T: Scalar> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: Self) -> Mat<T> {
        self.try_mul(rhs).expect("matrix product shape mismatch")
    }
}

impl<T: Scalar> Add for &Mat<T> {
    type Output = Mat<T>;
    fn add(self, rhs: Self) -> Mat<T> {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl<T: Scalar> Sub for &Mat<T> {
    type Output = Mat<T>;
    fn sub(self, rhs: Self) -> Mat<T> {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl<T: Scalar> Neg for &Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        self.map(|v| -v.clone())
    }
}

/// Builds a matrix from integer ratio pairs; handy in tests and docs.
///
/// ```
/// use qbd_potential::matrix::mat_from_ratios;
/// use qbd_potential::scalar::{ratio, Rational};
///
/// let m = mat_from_ratios::<Rational>(&[&[(1, 2), (0, 1)], &[(0, 1), (1, 4)]]);
/// assert_eq!(m.get(1, 1), &ratio(1, 4));
/// ```
pub fn mat_from_ratios<T: Scalar>(rows: &[&[(i64, i64)]]) -> Mat<T> {
    let r = rows.len();
    let c = rows[0].len();
    Mat::from_fn(r, c, |i, j| {
        let (p, q) = rows[i][j];
        T::from_ratio(p, q)
    })
}
