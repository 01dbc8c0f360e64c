//! Measurement constraints and their orthonormal reformulation.
//!
//! A [`ConstraintSet`] holds the raw data `tr(ρ Z_i) = f̂_i` with `Z_1 = I`
//! and `f̂_1 = 1`. [`orthonormalize`] runs Gram–Schmidt in the Frobenius
//! inner product, producing an [`OrthonormalProblem`]: orthonormal `X_i`
//! with transformed data `f̄ = T f̂`, a traceless completion basis `Y_j`, and
//! the pseudo-state `ρ̃₀ = Σ f̄_i X_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hermitian::{frobenius_inner, HermitianMatrix};

/// Raw linear constraints `tr(ρ Z_i) = f̂_i`, i = 1..p.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    dim: usize,
    observables: Vec<HermitianMatrix>,
    estimates: Vec<f64>,
    reliability: Option<Vec<f64>>,
}

impl ConstraintSet {
    /// Builds a constraint set from the full observable list, which must
    /// start with the identity and estimate 1.
    pub fn new(observables: Vec<HermitianMatrix>, estimates: Vec<f64>) -> Result<Self> {
        let first = observables
            .first()
            .ok_or_else(|| Error::InvalidConstraints("no observables".into()))?;
        let dim = first.dim();
        if observables.len() != estimates.len() {
            return Err(Error::InvalidConstraints(format!(
                "{} observables but {} estimates",
                observables.len(),
                estimates.len()
            )));
        }
        if let Some(i) = observables.iter().position(|z| z.dim() != dim) {
            return Err(Error::InvalidConstraints(format!(
                "observable {} has dimension {}, expected {dim}",
                i + 1,
                observables[i].dim()
            )));
        }
        if *first != HermitianMatrix::identity(dim) {
            return Err(Error::InvalidConstraints("Z_1 must be the identity".into()));
        }
        if estimates[0] != 1.0 {
            return Err(Error::InvalidConstraints(format!(
                "f_1 must be 1 (trace constraint), got {}",
                estimates[0]
            )));
        }
        if let Some(i) = estimates.iter().position(|f| !f.is_finite()) {
            return Err(Error::InvalidConstraints(format!("estimate {} is not finite", i + 1)));
        }
        Ok(Self {
            dim,
            observables,
            estimates,
            reliability: None,
        })
    }

    /// Builds a constraint set from measured observables `Z_2..Z_p`; the
    /// trace constraint is prepended.
    pub fn from_measurements(
        dim: usize,
        observables: Vec<HermitianMatrix>,
        estimates: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConstraints("dimension must be at least 1".into()));
        }
        let mut z = Vec::with_capacity(observables.len() + 1);
        z.push(HermitianMatrix::identity(dim));
        z.extend(observables);
        let mut f = Vec::with_capacity(estimates.len() + 1);
        f.push(1.0);
        f.extend(estimates);
        Self::new(z, f)
    }

    /// Attaches reliability indexes `d_2..d_p`, each in (0, 1].
    pub fn with_reliability(mut self, d: Vec<f64>) -> Result<Self> {
        if d.len() + 1 != self.observables.len() {
            return Err(Error::InvalidConstraints(format!(
                "{} reliability indexes for {} measured observables",
                d.len(),
                self.observables.len() - 1
            )));
        }
        if let Some(i) = d.iter().position(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::InvalidConstraints(format!(
                "reliability index {} = {} is outside (0, 1]",
                i + 2,
                d[i]
            )));
        }
        self.reliability = Some(d);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of constraints including the trace constraint.
    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn observables(&self) -> &[HermitianMatrix] {
        &self.observables
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn reliability(&self) -> Option<&[f64]> {
        self.reliability.as_deref()
    }

    /// Same observables and reliability with replaced estimates.
    pub fn with_estimates(&self, estimates: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.observables.clone(), estimates)?;
        out.reliability = self.reliability.clone();
        Ok(out)
    }

    /// `tr(ρ Z_i)` for every observable.
    pub fn evaluate(&self, rho: &HermitianMatrix) -> Result<Vec<f64>> {
        self.observables.iter().map(|z| frobenius_inner(rho, z)).collect()
    }
}

/// Default linear-dependence threshold for Gram–Schmidt residuals.
pub fn default_dep_tol(n: usize) -> f64 {
    1e-9 * (n as f64).sqrt()
}

/// Orthonormal constraint basis with transformed data, completion basis and
/// pseudo-state.
#[derive(Debug, Clone)]
pub struct OrthonormalProblem {
    dim: usize,
    x: Vec<HermitianMatrix>,
    f_bar: DVector<f64>,
    y: Vec<HermitianMatrix>,
    t: DMatrix<f64>,
    rho0: HermitianMatrix,
    retained: Vec<usize>,
}

impl OrthonormalProblem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of independent constraints.
    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[HermitianMatrix] {
        &self.x
    }

    pub fn y(&self) -> &[HermitianMatrix] {
        &self.y
    }

    pub fn f_bar(&self) -> &DVector<f64> {
        &self.f_bar
    }

    /// The m×p map with `f̄ = T f̂`.
    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    /// Pseudo-state `ρ̃₀ = Σ f̄_i X_i`.
    pub fn rho0(&self) -> &HermitianMatrix {
        &self.rho0
    }

    /// Indexes (0-based, into the source constraint set) of the observables
    /// that were kept as linearly independent.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    /// Copy with replaced transformed data; `ρ̃₀` is rebuilt.
    pub fn with_f_bar(&self, f_bar: DVector<f64>) -> Result<Self> {
        if f_bar.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: f_bar.len(),
            });
        }
        let rho0 = combine(self.dim, &self.x, f_bar.as_slice());
        Ok(Self {
            f_bar,
            rho0,
            ..self.clone()
        })
    }

    /// Copy with data `T f̂` for new raw estimates, reusing the stored basis.
    pub fn with_estimates(&self, f_hat: &[f64]) -> Result<Self> {
        if f_hat.len() != self.t.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.t.ncols(),
                found: f_hat.len(),
            });
        }
        self.with_f_bar(&self.t * DVector::from_column_slice(f_hat))
    }

    /// Orthogonal projection onto the affine set `{ρ : L(ρ) = f̄}`.
    pub fn project_affine(&self, z: &HermitianMatrix) -> Result<HermitianMatrix> {
        let r = apply_l(self, z)? - &self.f_bar;
        let mut out = z.clone();
        for (xi, ri) in self.x.iter().zip(r.iter()) {
            out.axpy(-ri, xi);
        }
        Ok(out)
    }

    /// `ρ̃₀ + Σ w_j Y_j`.
    pub fn affine_point(&self, w: &[f64]) -> Result<HermitianMatrix> {
        if w.len() != self.y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.y.len(),
                found: w.len(),
            });
        }
        let mut out = self.rho0.clone();
        for (yj, wj) in self.y.iter().zip(w) {
            out.axpy(*wj, yj);
        }
        Ok(out)
    }
}

fn combine(n: usize, basis: &[HermitianMatrix], coeffs: &[f64]) -> HermitianMatrix {
    let mut out = HermitianMatrix::zeros(n);
    for (b, c) in basis.iter().zip(coeffs) {
        out.axpy(*c, b);
    }
    out
}

/// Gram–Schmidt orthonormalization of the constraint observables.
///
/// Observables whose residual against the accepted basis has norm at most
/// `dep_tol` are dropped. The diagonal coefficient `α_i^i` is always
/// positive.
pub fn orthonormalize(cs: &ConstraintSet, dep_tol: f64) -> Result<OrthonormalProblem> {
    let n = cs.dim();
    let p = cs.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    // row i of T, i.e. X_i = Σ_j T_ij Z_j
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut retained = Vec::new();

    for (idx, z) in cs.observables().iter().enumerate() {
        let mut r = z.to_coords();
        let mut coeff = DVector::zeros(p);
        coeff[idx] = 1.0;
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for (q, row) in basis.iter().zip(&rows) {
                let a = q.dot(&r);
                r.axpy(-a, q, 1.0);
                coeff.axpy(-a, row, 1.0);
            }
        }
        let norm = r.norm();
        if idx == 0 {
            // Z_1 = I, so X_1 = I/√n exactly
            let mut q = DVector::zeros(n * n);
            let s = 1.0 / (n as f64).sqrt();
            for k in 0..n {
                q[k] = s;
            }
            let mut row = DVector::zeros(p);
            row[0] = s;
            basis.push(q);
            rows.push(row);
            retained.push(0);
            continue;
        }
        if norm <= dep_tol {
            continue;
        }
        basis.push(r / norm);
        rows.push(coeff / norm);
        retained.push(idx);
    }

    let m = basis.len();
    let x: Vec<HermitianMatrix> = basis
        .iter()
        .map(|c| HermitianMatrix::from_coords(n, c))
        .collect::<Result<_>>()?;
    let t = DMatrix::from_fn(m, p, |i, j| rows[i][j]);
    let f_bar = &t * DVector::from_column_slice(cs.estimates());
    let y = complete_coords(&basis, n)
        .iter()
        .map(|c| HermitianMatrix::from_coords(n, c))
        .collect::<Result<Vec<_>>>()?;
    let rho0 = combine(n, &x, f_bar.as_slice());
    Ok(OrthonormalProblem {
        dim: n,
        x,
        f_bar,
        y,
        t,
        rho0,
        retained,
    })
}

/// Orthonormal completion of `x` to a basis of H_n.
///
/// Candidates are the canonical Hermitian basis elements; at each step the
/// candidate with the largest residual is accepted, ties going to the lower
/// canonical index.
pub fn complete_basis(x: &[HermitianMatrix], n: usize) -> Result<Vec<HermitianMatrix>> {
    if let Some(bad) = x.iter().find(|xi| xi.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.dim(),
        });
    }
    let coords: Vec<DVector<f64>> = x.iter().map(HermitianMatrix::to_coords).collect();
    complete_coords(&coords, n)
        .iter()
        .map(|c| HermitianMatrix::from_coords(n, c))
        .collect()
}

fn complete_coords(basis: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    let total = n * n;
    let needed = total.saturating_sub(basis.len());
    let mut q: Vec<DVector<f64>> = basis.to_vec();
    let mut residuals: Vec<DVector<f64>> = (0..total)
        .map(|k| {
            let mut e = DVector::zeros(total);
            e[k] = 1.0;
            for _ in 0..2 {
                for b in basis {
                    let a = b.dot(&e);
                    e.axpy(-a, b, 1.0);
                }
            }
            e
        })
        .collect();
    let mut out = Vec::with_capacity(needed);
    let mut used = vec![false; total];
    for _ in 0..needed {
        let (best, _) = residuals
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, r)| (k, r.norm()))
            .fold((usize::MAX, -1.0), |acc, (k, nrm)| if nrm > acc.1 { (k, nrm) } else { acc });
        used[best] = true;
        let mut v = residuals[best].clone();
        for b in &q {
            let a = b.dot(&v);
            v.axpy(-a, b, 1.0);
        }
        let v = v.normalize();
        for r in residuals.iter_mut() {
            let a = v.dot(r);
            r.axpy(-a, &v, 1.0);
        }
        q.push(v.clone());
        out.push(v);
    }
    out
}

/// `L(ρ) = (tr(ρX_1), …, tr(ρX_m))`.
pub fn apply_l(ob: &OrthonormalProblem, rho: &HermitianMatrix) -> Result<DVector<f64>> {
    let vals = ob
        .x
        .iter()
        .map(|xi| frobenius_inner(rho, xi))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

/// `L*(λ) = Σ λ_i X_i`.
pub fn apply_l_adjoint(ob: &OrthonormalProblem, lambda: &DVector<f64>) -> Result<HermitianMatrix> {
    if lambda.len() != ob.m() {
        return Err(Error::DimensionMismatch {
            expected: ob.m(),
            found: lambda.len(),
        });
    }
    Ok(combine(ob.dim, &ob.x, lambda.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{pauli_x, pauli_y, pauli_z};

    const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn qubit(f2: f64) -> ConstraintSet {
        ConstraintSet::from_measurements(2, vec![pauli_z()], vec![f2]).unwrap()
    }

    fn close_mat(a: &HermitianMatrix, b: &HermitianMatrix, tol: f64) -> bool {
        (a - b).frobenius_norm() <= tol
    }

    #[test]
    fn qubit_sigma_z_orthonormalization() {
        let ob = orthonormalize(&qubit(0.5), default_dep_tol(2)).unwrap();
        assert_eq!(ob.m(), 2);
        assert!(close_mat(&ob.x()[0], &HermitianMatrix::identity(2).scale(S2), 1e-15));
        assert!(close_mat(&ob.x()[1], &pauli_z().scale(S2), 1e-15));
        assert!((ob.f_bar()[0] - S2).abs() < 1e-15);
        assert!((ob.f_bar()[1] - 0.5 * S2).abs() < 1e-15);
        assert!(close_mat(ob.rho0(), &HermitianMatrix::from_real_diagonal(&[0.75, 0.25]), 1e-15));
        assert!((ob.t()[(0, 0)] - S2).abs() < 1e-15);
        assert_eq!(ob.t()[(0, 1)], 0.0);
    }

    #[test]
    fn dependent_observable_is_dropped() {
        let cs = ConstraintSet::from_measurements(2, vec![pauli_z(), pauli_z().scale(2.0)], vec![0.5, 1.0])
            .unwrap();
        let ob = orthonormalize(&cs, default_dep_tol(2)).unwrap();
        assert_eq!(ob.m(), 2);
        assert_eq!(ob.retained(), &[0, 1]);
        assert_eq!(ob.t().shape(), (2, 3));
    }

    #[test]
    fn trace_only_problem() {
        let cs = ConstraintSet::from_measurements(2, vec![], vec![]).unwrap();
        let ob = orthonormalize(&cs, default_dep_tol(2)).unwrap();
        assert_eq!(ob.m(), 1);
        assert!((ob.f_bar()[0] - S2).abs() < 1e-15);
        assert_eq!(ob.y().len(), 3);
    }

    #[test]
    fn completion_spans_remaining_paulis() {
        let x = vec![HermitianMatrix::identity(2).scale(S2), pauli_z().scale(S2)];
        let y = complete_basis(&x, 2).unwrap();
        assert_eq!(y.len(), 2);
        for yi in &y {
            assert!(yi.trace().abs() < 1e-15);
            let cx = frobenius_inner(yi, &pauli_x()).unwrap() * S2;
            let cy = frobenius_inner(yi, &pauli_y()).unwrap() * S2;
            // yi lies in span{σx, σy}/√2 and has unit norm
            assert!((cx * cx + cy * cy - 1.0).abs() < 1e-14);
        }
        assert!(frobenius_inner(&y[0], &y[1]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn full_pauli_basis_has_empty_completion() {
        let x: Vec<_> = [HermitianMatrix::identity(2), pauli_x(), pauli_y(), pauli_z()]
            .iter()
            .map(|p| p.scale(S2))
            .collect();
        assert!(complete_basis(&x, 2).unwrap().is_empty());
    }

    #[test]
    fn qutrit_completion_is_orthonormal_and_traceless() {
        let x = vec![HermitianMatrix::identity(3).scale(1.0 / 3f64.sqrt())];
        let y = complete_basis(&x, 3).unwrap();
        assert_eq!(y.len(), 8);
        for (i, a) in y.iter().enumerate() {
            assert!(a.trace().abs() < 1e-14);
            for (j, b) in y.iter().enumerate() {
                let g = frobenius_inner(a, b).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g - expected).abs() < 1e-14, "gram[{i}][{j}] = {g}");
            }
        }
    }

    #[test]
    fn linear_map_examples() {
        let ob = orthonormalize(&qubit(0.5), default_dep_tol(2)).unwrap();
        let l0 = apply_l(&ob, ob.rho0()).unwrap();
        assert!((l0 - ob.f_bar()).amax() < 1e-15);
        let mixed = HermitianMatrix::identity(2).scale(0.5);
        let l = apply_l(&ob, &mixed).unwrap();
        assert!((l[0] - S2).abs() < 1e-15 && l[1].abs() < 1e-15);
        let l = apply_l(&ob, &HermitianMatrix::from_real_diagonal(&[0.75, 0.25])).unwrap();
        assert!((l[0] - S2).abs() < 1e-15 && (l[1] - 0.5 * S2).abs() < 1e-15);

        let e1 = apply_l_adjoint(&ob, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!(close_mat(&e1, &HermitianMatrix::identity(2).scale(S2), 1e-15));
        let z = apply_l_adjoint(&ob, &DVector::zeros(2)).unwrap();
        assert_eq!(z.frobenius_norm(), 0.0);
        let s = apply_l_adjoint(&ob, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!(close_mat(&s, &HermitianMatrix::from_real_diagonal(&[3.0 * S2, -S2]), 1e-15));
        assert!(apply_l_adjoint(&ob, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn constraint_set_validation() {
        assert!(ConstraintSet::new(vec![pauli_z()], vec![1.0]).is_err());
        assert!(ConstraintSet::new(vec![HermitianMatrix::identity(2)], vec![0.9]).is_err());
        assert!(ConstraintSet::from_measurements(2, vec![pauli_z()], vec![]).is_err());
        assert!(ConstraintSet::from_measurements(2, vec![HermitianMatrix::identity(3)], vec![0.0]).is_err());
        assert!(qubit(0.5).with_reliability(vec![0.0]).is_err());
        assert!(qubit(0.5).with_reliability(vec![1.5]).is_err());
        assert!(qubit(0.5).with_reliability(vec![0.5, 0.5]).is_err());
        assert!(qubit(0.5).with_reliability(vec![0.5]).is_ok());
    }

    #[test]
    fn with_estimates_reuses_transform() {
        let ob = orthonormalize(&qubit(0.5), default_dep_tol(2)).unwrap();
        let moved = ob.with_estimates(&[1.0, -0.2]).unwrap();
        assert!((moved.f_bar()[1] + 0.2 * S2).abs() < 1e-15);
        assert!(close_mat(moved.rho0(), &HermitianMatrix::from_real_diagonal(&[0.4, 0.6]), 1e-15));
    }
}
