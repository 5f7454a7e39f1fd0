//! Small dense linear algebra.
//!
//! Matrices are stored row-major and flattened row-major: `flatten` of a
//! `d x d` matrix `M` is the length-`d²` vector whose entry `i·d + j` is
//! `M[i][j]`. Every identity in the crate that mixes flattened vectors with
//! Kronecker products relies on this single convention.
//!
//! Square roots, inverses and log-determinants of symmetric matrices go
//! through a symmetric eigendecomposition. Eigenvalues at or below
//! [`EIGEN_FLOOR`] are rejected, never regularized.
//!
//! The design envelope is `d ≤ 32`, so `d² x d²` Kronecker products are
//! materialized densely.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

/// Smallest eigenvalue accepted by the positive-definite routines.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Largest tolerated `|a_ij - a_ji|`, relative to `max(1, max |a_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("expected {expected} entries, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("length {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not symmetric: max |a_ij - a_ji| = {0:e}")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite: eigenvalue {index} is {value:e} (floor {floor:e})")]
    NotPositiveDefinite { index: usize, value: f64, floor: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// A dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// Builds a matrix from row-major entries, checking length and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(pos));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::BadLength {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius inner product `tr(A Bᵀ)`.
    pub fn inner(&self, other: &Mat) -> f64 {
        assert_eq!(self.shape(), other.shape(), "inner: shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        let svd = self.to_nalgebra().svd(false, false);
        svd.singular_values.iter().fold(0.0, |m: f64, v| m.max(*v))
    }

    /// Largest `|a_ij - a_ji|`; requires a square matrix.
    pub fn asymmetry(&self) -> Result<f64> {
        self.require_square()?;
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        Ok(worst)
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrize(&self) -> Result<Self> {
        self.require_square()?;
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        }))
    }

    pub fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Fails unless the matrix is square and symmetric within [`SYMMETRY_TOL`].
    pub fn require_symmetric(&self) -> Result<()> {
        let asym = self.asymmetry()?;
        if asym > SYMMETRY_TOL * self.max_abs().max(1.0) {
            return Err(LinalgError::NotSymmetric(asym));
        }
        Ok(())
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec: dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ A w`.
    pub fn bilinear(&self, v: &[f64], w: &[f64]) -> f64 {
        assert_eq!(self.rows, v.len(), "bilinear: dimension mismatch");
        v.iter().zip(self.matvec(w)).map(|(a, b)| a * b).sum()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    #[cfg(test)]
    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Mat {
    type Output = Mat;

    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "add: shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Mat {
    type Output = Mat;

    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "sub: shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Mat {
    type Output = Mat;

    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "mul: inner dimension mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// A vector in `R^{d²}` viewed as a flattened `d x d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatVec(Vec<f64>);

impl FlatVec {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(pos));
        }
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Side length `d` of the matrix this vector flattens.
    pub fn side(&self) -> Result<usize> {
        perfect_square_root(self.0.len())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Integer square root of `len`, or an error if `len` is not a perfect square.
pub fn perfect_square_root(len: usize) -> Result<usize> {
    let mut d = (len as f64).sqrt().round() as usize;
    while d * d > len {
        d -= 1;
    }
    while (d + 1) * (d + 1) <= len {
        d += 1;
    }
    if d * d == len && d > 0 {
        Ok(d)
    } else {
        Err(LinalgError::NotPerfectSquare(len))
    }
}

/// Row-major flattening of a square matrix.
pub fn flatten(m: &Mat) -> Result<FlatVec> {
    m.require_square()?;
    Ok(FlatVec(m.as_slice().to_vec()))
}

/// Inverse of [`flatten`].
pub fn unflatten(v: &FlatVec) -> Result<Mat> {
    let d = v.side()?;
    Mat::new(d, d, v.0.clone())
}

/// Flattening of the transpose of the matrix `v` flattens.
pub fn transpose_flatten(v: &FlatVec) -> Result<FlatVec> {
    let d = v.side()?;
    Ok(FlatVec(
        (0..d * d).map(|l| v.0[(l % d) * d + l / d]).collect(),
    ))
}

/// Kronecker product; `(A ⊗ B)[(i,k),(j,l)] = A[i,j] · B[k,l]`.
pub fn kronecker(a: &Mat, b: &Mat) -> Mat {
    let (n, m) = a.shape();
    let (k, l) = b.shape();
    Mat::from_fn(n * k, m * l, |r, c| a[(r / k, c / l)] * b[(r % k, c % l)])
}

/// Symmetric eigendecomposition `A = V diag(λ) Vᵀ`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    values: Vec<f64>,
    vectors: Mat,
}

impl SymEigen {
    pub fn new(a: &Mat) -> Result<Self> {
        a.require_symmetric()?;
        let eig = SymmetricEigen::new(a.symmetrize()?.to_nalgebra());
        let n = a.rows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = Mat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { values, vectors })
    }

    /// Eigenvalues in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvectors stored as columns, matching [`Self::values`].
    pub fn vectors(&self) -> &Mat {
        &self.vectors
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Fails on the first eigenvalue not above [`EIGEN_FLOOR`].
    pub fn require_positive_definite(&self) -> Result<()> {
        match self.values.iter().position(|&v| v <= EIGEN_FLOOR) {
            Some(index) => Err(LinalgError::NotPositiveDefinite {
                index,
                value: self.values[index],
                floor: EIGEN_FLOOR,
            }),
            None => Ok(()),
        }
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let v = &self.vectors;
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| v[(i, k)] * fv[k] * v[(j, k)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

/// Principal square root of a symmetric positive definite matrix.
pub fn sym_sqrt(a: &Mat) -> Result<Mat> {
    let eig = SymEigen::new(a)?;
    eig.require_positive_definite()?;
    Ok(eig.map(f64::sqrt))
}

/// `A^{-1/2}` for symmetric positive definite `A`.
pub fn sym_inv_sqrt(a: &Mat) -> Result<Mat> {
    let eig = SymEigen::new(a)?;
    eig.require_positive_definite()?;
    Ok(eig.map(|v| 1.0 / v.sqrt()))
}

/// Inverse of a symmetric positive definite matrix.
pub fn sym_inverse(a: &Mat) -> Result<Mat> {
    let eig = SymEigen::new(a)?;
    eig.require_positive_definite()?;
    Ok(eig.map(|v| 1.0 / v))
}

/// `ln det A` for symmetric positive definite `A`.
pub fn log_det_spd(a: &Mat) -> Result<f64> {
    let eig = SymEigen::new(a)?;
    eig.require_positive_definite()?;
    Ok(eig.values().iter().map(|v| v.ln()).sum())
}

/// Mahalanobis norm of a matrix, `‖Σ^{-1/2} M Σ^{-1/2}‖_F`.
pub fn mahalanobis_mat(m: &Mat, sigma: &Mat) -> Result<f64> {
    if m.shape() != sigma.shape() {
        return Err(LinalgError::ShapeMismatch {
            left: m.shape(),
            right: sigma.shape(),
        });
    }
    let w = sym_inv_sqrt(sigma)?;
    Ok((&(&w * m) * &w).frobenius_norm())
}

/// Mahalanobis norm of a vector, `‖Σ^{-1/2} x‖₂`.
pub fn mahalanobis_vec(x: &[f64], sigma: &Mat) -> Result<f64> {
    if sigma.rows() != x.len() {
        return Err(LinalgError::ShapeMismatch {
            left: (x.len(), 1),
            right: sigma.shape(),
        });
    }
    let w = sym_inv_sqrt(sigma)?;
    Ok(w.matvec(x).iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Union of the Gershgorin discs on the real line:
/// `[min_i (a_ii - r_i), max_i (a_ii + r_i)]` with `r_i = Σ_{j≠i} |a_ij|`.
pub fn gershgorin_interval(a: &Mat) -> Result<(f64, f64)> {
    a.require_square()?;
    let n = a.rows();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        lo = lo.min(a[(i, i)] - radius);
        hi = hi.max(a[(i, i)] + radius);
    }
    Ok((lo, hi))
}

/// `(λ_min, λ_max)` of a symmetric matrix.
pub fn eig_range_symmetric(a: &Mat) -> Result<(f64, f64)> {
    let eig = SymEigen::new(a)?;
    Ok((eig.min(), eig.max()))
}
