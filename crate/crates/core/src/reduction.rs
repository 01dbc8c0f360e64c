//! Restriction of a singular problem to the common support of its solutions.
//!
//! When every solution is singular they share a kernel `K`. With a unitary
//! `U = [W | K]` whose leading columns span the support, each solution has
//! the block form `U [ρ₁ 0; 0 0] U†` and the constraints act on `ρ₁` through
//! the compressed observables `X̄_i = W† X_i W`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::constraints::{orthonormalize, ConstraintSet, OrthonormalProblem};
use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;

/// Dependence threshold applied when the compressed observables are
/// re-orthonormalized. Compression of an approximately located support leaves
/// residues well above round-off, so this is looser than the full-space
/// default.
pub const REDUCED_DEP_TOL: f64 = 1e-6;

/// Unitary split of `C^n` into support (first `n1` columns) and kernel.
#[derive(Debug, Clone)]
pub struct KernelDecomposition {
    u: DMatrix<Complex64>,
    n1: usize,
    source_rank_tol: f64,
}

impl KernelDecomposition {
    pub fn u(&self) -> &DMatrix<Complex64> {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// Support dimension.
    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn source_rank_tol(&self) -> f64 {
        self.source_rank_tol
    }

    /// The n×n1 isometry onto the support.
    pub fn support(&self) -> DMatrix<Complex64> {
        self.u.columns(0, self.n1).into_owned()
    }

    /// The n×(n−n1) isometry onto the kernel.
    pub fn kernel(&self) -> DMatrix<Complex64> {
        self.u.columns(self.n1, self.dim() - self.n1).into_owned()
    }

    pub fn is_full_rank(&self) -> bool {
        self.n1 == self.dim()
    }
}

/// `n · 1e-9 · λ_max(ρ)`.
pub fn default_rank_tol(rho: &HermitianMatrix) -> Result<f64> {
    let eig = rho.eigen()?;
    Ok(rho.dim() as f64 * 1e-9 * eig.max().max(0.0))
}

/// Rescales `v` so its first entry of modulus above `1e-12` is real positive.
fn normalize_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12).copied() {
        let phase = z.conj() / z.norm();
        v *= phase;
    }
    v
}

fn lexicographic_re(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match y.re.total_cmp(&x.re) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Orders `(value, vector)` pairs by descending value. Runs of values whose
/// consecutive gaps are at most `tie` form one cluster, ordered internally by
/// the real parts of the vector entries, larger first.
fn sort_pairs(pairs: &mut Vec<(f64, DVector<Complex64>)>, tie: f64) {
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cluster = Vec::with_capacity(pairs.len());
    let mut c = 0usize;
    for k in 0..pairs.len() {
        if k > 0 && pairs[k - 1].0 - pairs[k].0 > tie {
            c += 1;
        }
        cluster.push(c);
    }
    let mut tagged: Vec<_> = cluster.into_iter().zip(pairs.drain(..)).collect();
    tagged.sort_by(|(ca, a), (cb, b)| ca.cmp(cb).then_with(|| lexicographic_re(&a.1, &b.1)));
    pairs.extend(tagged.into_iter().map(|(_, p)| p));
}

fn assemble(n: usize, pairs: &[(f64, DVector<Complex64>)]) -> DMatrix<Complex64> {
    let mut u = DMatrix::zeros(n, n);
    for (k, (_, v)) in pairs.iter().enumerate() {
        u.set_column(k, v);
    }
    u
}

/// Splits the spectrum of a minimal-kernel solution at `rank_tol`.
pub fn kernel_decomposition(rho: &HermitianMatrix, rank_tol: f64) -> Result<KernelDecomposition> {
    let n = rho.dim();
    let eig = rho.eigen()?;
    let pairs = (0..n).map(|k| (eig.values[k], normalize_phase(eig.vectors.column(k).into_owned())));
    let (mut support, mut kernel): (Vec<_>, Vec<_>) = pairs.partition(|(v, _)| *v > rank_tol);
    let n1 = support.len();
    if n1 == 0 {
        return Err(Error::DegenerateInput(format!(
            "no eigenvalue exceeds rank tolerance {rank_tol:e}"
        )));
    }
    sort_pairs(&mut support, rank_tol);
    sort_pairs(&mut kernel, rank_tol);
    support.extend(kernel);
    Ok(KernelDecomposition {
        u: assemble(n, &support),
        n1,
        source_rank_tol: rank_tol,
    })
}

/// Completes an n×r isometry `w` to a unitary with `w` as leading columns.
pub fn decomposition_from_support(w: &DMatrix<Complex64>) -> Result<KernelDecomposition> {
    let n = w.nrows();
    let r = w.ncols();
    if r == 0 || r > n {
        return Err(Error::InvalidRank { rank: r, dim: n });
    }
    let mut u = DMatrix::zeros(n, n);
    u.columns_mut(0, r).copy_from(w);
    if r < n {
        // eigenvectors of the complementary projector with eigenvalue 1
        let proj = HermitianMatrix::from_matrix_unchecked(DMatrix::identity(n, n) - w * w.adjoint());
        let eig = proj.eigen()?;
        let mut pairs: Vec<(f64, DVector<Complex64>)> = (r..n)
            .map(|k| (0.0, normalize_phase(eig.vectors.column(k).into_owned())))
            .collect();
        sort_pairs(&mut pairs, 0.0);
        for (j, (_, v)) in pairs.iter().enumerate() {
            u.set_column(r + j, v);
        }
    }
    Ok(KernelDecomposition {
        u,
        n1: r,
        source_rank_tol: 0.0,
    })
}

/// Estimation problem on the support together with the data needed to lift
/// its solutions.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    inner: OrthonormalProblem,
    reduced_x: Vec<HermitianMatrix>,
    kd: KernelDecomposition,
}

impl ReducedProblem {
    /// Re-orthonormalized problem on `H_{n1}`.
    pub fn inner(&self) -> &OrthonormalProblem {
        &self.inner
    }

    /// Compressed observables `X̄_i = W† X_i W` before re-orthonormalization.
    pub fn reduced_x(&self) -> &[HermitianMatrix] {
        &self.reduced_x
    }

    pub fn decomposition(&self) -> &KernelDecomposition {
        &self.kd
    }

    pub fn lift(&self, rho1: &HermitianMatrix) -> Result<HermitianMatrix> {
        lift_solution(rho1, &self.kd)
    }
}

/// Compresses the constraints of `ob` onto the support of `kd`.
pub fn reduce_problem(ob: &OrthonormalProblem, kd: &KernelDecomposition) -> Result<ReducedProblem> {
    reduce_problem_with(ob, kd, REDUCED_DEP_TOL)
}

pub fn reduce_problem_with(
    ob: &OrthonormalProblem,
    kd: &KernelDecomposition,
    dep_tol: f64,
) -> Result<ReducedProblem> {
    if kd.dim() != ob.dim() {
        return Err(Error::DimensionMismatch {
            expected: ob.dim(),
            found: kd.dim(),
        });
    }
    let w = kd.support();
    let n1 = kd.n1();
    let reduced_x = ob
        .x()
        .iter()
        .map(|xi| xi.congruence(&w))
        .collect::<Result<Vec<_>>>()?;
    // X̄_1 = I/√n with f̄_1 = 1/√n is the trace constraint on H_{n1}
    let cs = ConstraintSet::from_measurements(
        n1,
        reduced_x[1..].to_vec(),
        ob.f_bar().iter().skip(1).copied().collect(),
    )?;
    let inner = orthonormalize(&cs, dep_tol)?;
    Ok(ReducedProblem {
        inner,
        reduced_x,
        kd: kd.clone(),
    })
}

/// `U [ρ₁ 0; 0 0] U†`.
pub fn lift_solution(rho1: &HermitianMatrix, kd: &KernelDecomposition) -> Result<HermitianMatrix> {
    if rho1.dim() != kd.n1() {
        return Err(Error::DimensionMismatch {
            expected: kd.n1(),
            found: rho1.dim(),
        });
    }
    rho1.congruence_adjoint(&kd.support())
}
