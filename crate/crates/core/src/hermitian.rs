//! Dense Hermitian linear algebra.
//!
//! Every state, observable and basis element in the crate is a
//! [`HermitianMatrix`]. Matrix functions (exponential, logarithm, inverse
//! square root) go through a full eigendecomposition; dimensions are small
//! (n ≤ 64) and the spectral data is reused by the solvers.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Numeric tolerances shared by the Hermitian kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericConfig {
    /// Eigenvalue floor for [`herm_log`].
    pub log_floor: f64,
    /// Relative tolerance for the imaginary residue of `tr(AB)`.
    pub imag_tol: f64,
    /// Maximum sweeps of the Hermitian eigensolver, per unit of dimension.
    pub eigen_sweeps_per_dim: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            log_floor: 1e-12,
            imag_tol: 1e-10,
            eigen_sweeps_per_dim: 1000,
        }
    }
}

/// An n×n complex Hermitian matrix.
///
/// Constructors symmetrize their input, so `A[j][k] == conj(A[k][j])` holds
/// exactly after construction.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<Complex64>,
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianMatrix{}", self.m)
    }
}

/// Spectral decomposition `A = V diag(values) V†` with ascending values.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Rebuilds `V diag(f(values)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let s = f(self.values[k]);
            scaled.column_mut(k).scale_mut(s);
        }
        HermitianMatrix::from_matrix_unchecked(&scaled * self.vectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.map(|x| x)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.dim() - 1]
    }
}

impl HermitianMatrix {
    /// Builds a Hermitian matrix from a square complex matrix, replacing it by
    /// `(A + A†)/2`.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Symmetrizes without shape validation. Callers guarantee squareness.
    pub(crate) fn from_matrix_unchecked(m: DMatrix<Complex64>) -> Self {
        let adj = m.adjoint();
        let mut sym = (m + adj) * Complex64::new(0.5, 0.0);
        for k in 0..sym.nrows() {
            sym[(k, k)].im = 0.0;
        }
        Self { m: sym }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidMatrix(format!(
                "row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_matrix_unchecked(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                C0
            }
        }))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    /// Projector |ψ⟩⟨ψ| onto a (not necessarily normalized) vector.
    pub fn outer(psi: &DVector<Complex64>) -> Self {
        Self::from_matrix_unchecked(psi * psi.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.m[(k, k)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            m: &self.m * Complex64::new(c, 0.0),
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &HermitianMatrix) {
        let c = Complex64::new(c, 0.0);
        self.m.zip_apply(&other.m, |a, b| *a += c * b);
    }

    /// `self + c·I`.
    pub fn shift(&self, c: f64) -> Self {
        let mut out = self.clone();
        for k in 0..self.dim() {
            out.m[(k, k)].re += c;
        }
        out
    }

    /// `W† A W` for an arbitrary n×k matrix `W`.
    pub fn congruence(&self, w: &DMatrix<Complex64>) -> Result<Self> {
        if w.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w.nrows(),
            });
        }
        Ok(Self::from_matrix_unchecked(w.adjoint() * &self.m * w))
    }

    /// `W A W†` for an n×k `W` and a k×k `A`.
    pub fn congruence_adjoint(&self, w: &DMatrix<Complex64>) -> Result<Self> {
        if w.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w.ncols(),
            });
        }
        Ok(Self::from_matrix_unchecked(w * &self.m * w.adjoint()))
    }

    pub fn eigen(&self) -> Result<EigenDecomposition> {
        eigen_with(self, &NumericConfig::default())
    }

    pub fn exp(&self) -> Result<Self> {
        herm_exp(self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(self)
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(min_eigenvalue(self)? >= -tol)
    }

    /// Real coordinates in the orthonormal canonical basis of H_n.
    ///
    /// Layout: the n diagonal entries, then for each j < k the pair
    /// (√2·Re A_jk, √2·Im A_jk). The Euclidean dot product of two coordinate
    /// vectors equals `tr(AB)`.
    pub fn to_coords(&self) -> DVector<f64> {
        let n = self.dim();
        let mut out = DVector::zeros(n * n);
        for k in 0..n {
            out[k] = self.m[(k, k)].re;
        }
        let mut idx = n;
        let r2 = std::f64::consts::SQRT_2;
        for j in 0..n {
            for k in (j + 1)..n {
                out[idx] = r2 * self.m[(j, k)].re;
                out[idx + 1] = r2 * self.m[(j, k)].im;
                idx += 2;
            }
        }
        out
    }

    /// Inverse of [`to_coords`](Self::to_coords).
    pub fn from_coords(n: usize, c: &DVector<f64>) -> Result<Self> {
        if c.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: c.len(),
            });
        }
        let mut m = DMatrix::from_element(n, n, C0);
        for k in 0..n {
            m[(k, k)] = Complex64::new(c[k], 0.0);
        }
        let mut idx = n;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..n {
            for k in (j + 1)..n {
                let z = Complex64::new(s * c[idx], s * c[idx + 1]);
                m[(j, k)] = z;
                m[(k, j)] = z.conj();
                idx += 2;
            }
        }
        Ok(Self { m })
    }

    /// The k-th element of the canonical orthonormal basis of H_n, in the
    /// same order as [`to_coords`](Self::to_coords): diagonal units, then
    /// symmetric and antisymmetric pairs.
    pub fn canonical_basis(n: usize) -> Vec<HermitianMatrix> {
        (0..n * n)
            .map(|k| {
                let mut c = DVector::zeros(n * n);
                c[k] = 1.0;
                Self::from_coords(n, &c).expect("length matches")
            })
            .collect()
    }
}

fn check_dims(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// `tr(AB)`, real for Hermitian arguments.
pub fn frobenius_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    check_dims(a, b)?;
    // tr(AB) = Σ_jk A_jk B_kj = Σ_jk A_jk conj(B_jk)
    let z: Complex64 = a
        .m
        .iter()
        .zip(b.m.iter())
        .map(|(x, y)| x * y.conj())
        .sum();
    debug_assert!(
        z.im.abs() <= NumericConfig::default().imag_tol * (1.0 + a.frobenius_norm() * b.frobenius_norm()),
        "imaginary residue {} in tr(AB)",
        z.im
    );
    Ok(z.re)
}

pub fn eigen_with(a: &HermitianMatrix, cfg: &NumericConfig) -> Result<EigenDecomposition> {
    let n = a.dim();
    let eig = SymmetricEigen::try_new(a.m.clone(), f64::EPSILON, cfg.eigen_sweeps_per_dim * n.max(1))
        .ok_or(Error::EigenNonConvergence { dim: n })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNonConvergence { dim: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::from_element(n, n, C0);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Matrix exponential `U diag(e^{a_k}) U†`.
pub fn herm_exp(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(a.eigen()?.map(f64::exp))
}

/// Matrix logarithm; every eigenvalue must exceed `floor`.
pub fn herm_log(a: &HermitianMatrix, floor: f64) -> Result<HermitianMatrix> {
    let eig = a.eigen()?;
    if eig.min() <= floor {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: eig.min(),
            floor,
        });
    }
    Ok(eig.map(f64::ln))
}

pub fn min_eigenvalue(a: &HermitianMatrix) -> Result<f64> {
    Ok(a.eigen()?.min())
}

pub fn is_psd(a: &HermitianMatrix, tol: f64) -> Result<bool> {
    a.is_psd(tol)
}

/// Clips negative eigenvalues to zero (Frobenius projection onto the PSD cone).
pub fn project_psd(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(a.eigen()?.map(|x| x.max(0.0)))
}

/// Pauli matrices σ_x, σ_y, σ_z.
pub fn pauli_x() -> HermitianMatrix {
    HermitianMatrix::from_rows(&[vec![C0, C1], vec![C1, C0]]).unwrap()
}

pub fn pauli_y() -> HermitianMatrix {
    let i = Complex64::new(0.0, 1.0);
    HermitianMatrix::from_rows(&[vec![C0, -i], vec![i, C0]]).unwrap()
}

pub fn pauli_z() -> HermitianMatrix {
    HermitianMatrix::from_real_diagonal(&[1.0, -1.0])
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in addition");
        HermitianMatrix { m: &self.m + &rhs.m }
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in subtraction");
        HermitianMatrix { m: &self.m - &rhs.m }
    }
}

impl Add for HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: HermitianMatrix) -> HermitianMatrix {
        &self + &rhs
    }
}

impl Sub for HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: HermitianMatrix) -> HermitianMatrix {
        &self - &rhs
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, c: f64) -> HermitianMatrix {
        self.scale(c)
    }
}

impl Mul<f64> for HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, c: f64) -> HermitianMatrix {
        self.scale(c)
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        self.scale(-1.0)
    }
}
