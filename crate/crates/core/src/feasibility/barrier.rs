//! Log-det barrier method for the minimum-eigenvalue problem
//!
//! ```text
//! minimize v_last  subject to  H(v) = ρ̃₀ + Σ v_i Y_i + v_last X_1 ⪰ 0
//! ```
//!
//! Each outer stage minimizes `g_q(v) = q·v_last − log det H(v)` with damped
//! Newton steps; `q` grows geometrically until `n/q` drops below the target
//! accuracy, which bounds the suboptimality of the returned value.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{classify, BarrierConfig, FeasibilityReport};
use crate::constraints::OrthonormalProblem;
use crate::error::{Error, Result};
use crate::hermitian::{EigenDecomposition, HermitianMatrix};

const STAGE: &str = "barrier";

/// One centered point of the barrier path.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub q: f64,
    pub v: DVector<f64>,
}

/// Affine matrix pencil `H(v) = ρ̃₀ + Σ v_i B_i` over `B = (Y_1, …, Y_k, X_1)`.
pub(crate) struct Pencil<'a> {
    rho0: &'a HermitianMatrix,
    basis: Vec<&'a HermitianMatrix>,
}

impl<'a> Pencil<'a> {
    pub(crate) fn new(ob: &'a OrthonormalProblem) -> Self {
        let mut basis: Vec<&HermitianMatrix> = ob.y().iter().collect();
        basis.push(&ob.x()[0]);
        Self {
            rho0: ob.rho0(),
            basis,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.basis.len()
    }

    pub(crate) fn eval(&self, v: &DVector<f64>) -> HermitianMatrix {
        self.combine(Some(self.rho0), v)
    }

    fn direction(&self, dv: &DVector<f64>) -> HermitianMatrix {
        self.combine(None, dv)
    }

    fn combine(&self, base: Option<&HermitianMatrix>, v: &DVector<f64>) -> HermitianMatrix {
        let mut h = base
            .cloned()
            .unwrap_or_else(|| HermitianMatrix::zeros(self.rho0.dim()));
        for (b, vi) in self.basis.iter().zip(v.iter()) {
            h.axpy(*vi, b);
        }
        h
    }
}

/// `H^{-1/2}` from a positive definite eigendecomposition.
fn inv_sqrt(eig: &EigenDecomposition) -> DMatrix<Complex64> {
    eig.map(|x| 1.0 / x.sqrt()).into_matrix()
}

/// Solves `(MᵀM) x = rhs` through the triangular factor of `M = QR`.
pub(crate) fn gram_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let r = m.qr().r();
    let z = r.tr_solve_upper_triangular(rhs)?;
    let x = r.solve_upper_triangular(&z)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves the minimum-eigenvalue problem and classifies feasibility.
pub fn solve_min_eigen(ob: &OrthonormalProblem, cfg: &BarrierConfig) -> Result<FeasibilityReport> {
    solve_min_eigen_observed(ob, cfg, |_, _| {})
}

/// As [`solve_min_eigen`], calling `observe(v, H(v))` on every accepted
/// Newton iterate, including the starting point.
pub fn solve_min_eigen_observed(
    ob: &OrthonormalProblem,
    cfg: &BarrierConfig,
    mut observe: impl FnMut(&DVector<f64>, &HermitianMatrix),
) -> Result<FeasibilityReport> {
    cfg.validate()?;
    let n = ob.dim();
    let pencil = Pencil::new(ob);
    let k = pencil.len();

    let lam_min = ob.rho0().min_eigenvalue()?;
    let mut v = DVector::zeros(k);
    v[k - 1] = (n as f64).sqrt() * (1.0 - lam_min);
    observe(&v, &pencil.eval(&v));

    let mut q = cfg.q0;
    let mut path = Vec::new();
    let mut newton_total = 0;
    let mut outer = 0;
    loop {
        newton_total += center(&pencil, q, &mut v, cfg, &mut observe)?;
        path.push(PathPoint { q, v: v.clone() });
        if (n as f64) / q < cfg.xi {
            break;
        }
        outer += 1;
        if outer >= cfg.max_outer {
            return Err(Error::IterationCapExceeded {
                stage: STAGE,
                iterations: outer,
                best: v[k - 1],
            });
        }
        q *= cfg.beta;
    }

    let mu = v[k - 1];
    let witness_matrix = pencil.eval(&v);
    Ok(FeasibilityReport {
        mu,
        classification: classify(mu, cfg.zero_tol),
        witness_v: v,
        witness_matrix,
        accuracy: n as f64 / q,
        outer_iterations: outer + 1,
        newton_iterations: newton_total,
        path,
    })
}

/// Minimizes `g_q` from `v` in place; returns the number of Newton steps.
fn center(
    pencil: &Pencil<'_>,
    q: f64,
    v: &mut DVector<f64>,
    cfg: &BarrierConfig,
    observe: &mut impl FnMut(&DVector<f64>, &HermitianMatrix),
) -> Result<usize> {
    let k = pencil.len();
    for it in 0..cfg.max_inner {
        let h = pencil.eval(v);
        let eig = h.eigen()?;
        if eig.min() <= 0.0 {
            return Err(Error::LineSearchStall {
                stage: STAGE,
                step: 0.0,
                decrement: f64::NAN,
            });
        }
        let s = inv_sqrt(&eig);
        let n = h.dim();

        // columns: coordinates of H^{-1/2} B_i H^{-1/2}; Hessian = MᵀM
        let mut m = DMatrix::zeros(n * n, k);
        let mut grad = DVector::zeros(k);
        for (i, b) in pencil.basis.iter().enumerate() {
            let w = HermitianMatrix::from_matrix_unchecked(&s * b.as_matrix() * &s);
            grad[i] = -w.trace();
            m.set_column(i, &w.to_coords());
        }
        grad[k - 1] += q;

        let dv = gram_solve(m, &(-&grad)).ok_or(Error::LineSearchStall {
            stage: STAGE,
            step: 0.0,
            decrement: f64::NAN,
        })?;
        let slope = grad.dot(&dv);
        let decrement = -slope;
        // round-off in H^{-1/2} puts a floor of order (ε κ(H))² under the
        // computed decrement
        let kappa = eig.max() / eig.min();
        let noise = k as f64 * (4.0 * f64::EPSILON * kappa).powi(2);
        if decrement / 2.0 <= cfg.newton_tol.max(noise) {
            return Ok(it);
        }

        // g(v + tΔ) − g(v) = q t Δ_last − Σ ln(1 + t ω_j), ω = eig(H^{-1/2} ΔH H^{-1/2})
        let dh = pencil.direction(&dv);
        let omega = HermitianMatrix::from_matrix_unchecked(&s * dh.as_matrix() * &s).eigen()?;
        let delta_g = |t: f64| {
            q * t * dv[k - 1] - omega.values.iter().map(|w| (t * w).ln_1p()).sum::<f64>()
        };
        let mut t = 1.0;
        while omega.values.iter().any(|w| 1.0 + t * w <= 0.0) {
            t *= cfg.ls_beta;
        }
        while delta_g(t) > cfg.ls_alpha * t * slope {
            t *= cfg.ls_beta;
            if t < 1e-20 {
                return Err(Error::LineSearchStall {
                    stage: STAGE,
                    step: t,
                    decrement,
                });
            }
        }
        v.axpy(t, &dv, 1.0);
        observe(v, &pencil.eval(v));
    }
    Err(Error::IterationCapExceeded {
        stage: STAGE,
        iterations: cfg.max_inner,
        best: v[k - 1],
    })
}
