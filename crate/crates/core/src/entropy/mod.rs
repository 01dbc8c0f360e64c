//! Minimum relative entropy through the Lagrange dual.
//!
//! For orthonormal constraints the stationary states have the form
//! `ρ(λ) = exp(log τ − I − L*(λ))`, and `λ°` minimizes the convex dual
//!
//! ```text
//! J(λ) = tr exp(log τ − I − L*(λ)) + ⟨λ, f̄⟩,    ∇J(λ) = f̄ − L(ρ(λ)).
//! ```

mod pipeline;

pub use pipeline::{estimate, EstimationResult, PipelineConfig, Relaxation};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constraints::{apply_l, apply_l_adjoint, OrthonormalProblem};
use crate::error::{Error, Result};
use crate::hermitian::{herm_log, EigenDecomposition, HermitianMatrix, NumericConfig};

const STAGE: &str = "dual";

/// Largest exponent accepted before `exp` is considered unsafe.
const EXP_LIMIT: f64 = 700.0;

/// Prior state `τ`, positive definite, with its cached logarithm.
#[derive(Debug, Clone)]
pub struct Prior {
    tau: HermitianMatrix,
    log_tau: HermitianMatrix,
}

impl Prior {
    /// `τ = I`.
    pub fn maxent(n: usize) -> Self {
        Self {
            tau: HermitianMatrix::identity(n),
            log_tau: HermitianMatrix::zeros(n),
        }
    }

    pub fn new(tau: HermitianMatrix) -> Result<Self> {
        let log_tau = herm_log(&tau, NumericConfig::default().log_floor)?;
        Ok(Self { tau, log_tau })
    }

    pub fn tau(&self) -> &HermitianMatrix {
        &self.tau
    }

    pub fn log_tau(&self) -> &HermitianMatrix {
        &self.log_tau
    }

    pub fn dim(&self) -> usize {
        self.tau.dim()
    }

    /// `W† τ W` with eigenvalues floored at `1e-10 · ‖W† τ W‖₂`.
    pub fn compressed(&self, w: &DMatrix<Complex64>) -> Result<Self> {
        let block = self.tau.congruence(w)?;
        let eig = block.eigen()?;
        let floor = 1e-10 * eig.max().abs().max(eig.min().abs());
        Self::new(eig.map(|x| x.max(floor)))
    }
}

/// Dual iterate with the primal state it induces.
#[derive(Debug, Clone)]
pub struct DualState {
    pub lambda: DVector<f64>,
    pub j: f64,
    /// `∇J = f̄ − L(ρ(λ))`.
    pub grad: DVector<f64>,
    /// `log τ − I − L*(λ)`.
    pub a: HermitianMatrix,
    /// `exp(a)`.
    pub rho_lambda: HermitianMatrix,
    eig: EigenDecomposition,
}

impl DualState {
    /// Spectral decomposition of `a`.
    pub fn spectrum(&self) -> &EigenDecomposition {
        &self.eig
    }
}

fn check_prior(ob: &OrthonormalProblem, prior: &Prior) -> Result<()> {
    if prior.dim() != ob.dim() {
        return Err(Error::DimensionMismatch {
            expected: ob.dim(),
            found: prior.dim(),
        });
    }
    Ok(())
}

/// Evaluates `J`, its gradient and `ρ(λ)`.
pub fn dual_eval(ob: &OrthonormalProblem, prior: &Prior, lambda: &DVector<f64>) -> Result<DualState> {
    check_prior(ob, prior)?;
    let l_star = apply_l_adjoint(ob, lambda)?;
    let a = (prior.log_tau() - &l_star).shift(-1.0);
    let eig = a.eigen()?;
    if eig.max() > EXP_LIMIT {
        return Err(Error::OverflowRisk {
            max_eigenvalue: eig.max(),
        });
    }
    let rho_lambda = eig.map(f64::exp);
    let grad = ob.f_bar() - apply_l(ob, &rho_lambda)?;
    let j = rho_lambda.trace() + lambda.dot(ob.f_bar());
    Ok(DualState {
        lambda: lambda.clone(),
        j,
        grad,
        a,
        rho_lambda,
        eig,
    })
}

/// First divided difference of `exp`.
fn exp_divided_difference(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() < 1e-8 {
        (0.5 * (a + b)).exp()
    } else {
        // (e^a − e^b)/(a − b) = e^b · expm1(d)/d, stable for moderate d
        b.exp() * d.exp_m1() / d
    }
}

/// `Hess_ij = Σ_kl Re[(V†X_iV)_kl (V†X_jV)_lk] φ(a_k, a_l)`.
pub fn dual_hessian(ds: &DualState, ob: &OrthonormalProblem) -> Result<DMatrix<f64>> {
    let eig = ds.spectrum();
    let n = eig.dim();
    if n != ob.dim() {
        return Err(Error::DimensionMismatch {
            expected: ob.dim(),
            found: n,
        });
    }
    let v = &eig.vectors;
    let phi = DMatrix::from_fn(n, n, |k, l| exp_divided_difference(eig.values[k], eig.values[l]));
    let rotated: Vec<DMatrix<Complex64>> = ob.x().iter().map(|x| v.adjoint() * x.as_matrix() * v).collect();
    let m = rotated.len();
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    // (B_j)_lk = conj((B_j)_kl) for Hermitian B_j
                    s += (rotated[i][(k, l)] * rotated[j][(k, l)].conj()).re * phi[(k, l)];
                }
            }
            h[(i, j)] = s;
            h[(j, i)] = s;
        }
    }
    Ok(h)
}

/// Newton parameters for the dual problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualConfig {
    /// Stop once `‖f̄ − L(ρ(λ))‖_∞` is at most this.
    pub tol: f64,
    pub max_iter: usize,
    pub ls_alpha: f64,
    pub ls_beta: f64,
    /// Hessians with larger condition estimates fall back to gradient steps.
    pub max_condition: f64,
    /// `λ_min(ρ(λ)) / λ_max(ρ(λ))` below this on failure is read as
    /// divergence toward a singular state.
    pub singular_ratio: f64,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            ls_alpha: 0.25,
            ls_beta: 0.5,
            max_condition: 1e12,
            singular_ratio: 1e-12,
        }
    }
}

/// Converged dual iterate.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub state: DualState,
    pub iterations: usize,
}

fn newton_direction(h: DMatrix<f64>, grad: &DVector<f64>, max_condition: f64) -> DVector<f64> {
    let eig = SymmetricEigen::new(h);
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 0.0) || hi / lo > max_condition {
        return -grad;
    }
    let v = &eig.eigenvectors;
    let coeffs = (v.transpose() * grad).component_div(&eig.eigenvalues);
    -(v * coeffs)
}

fn is_singular(ds: &DualState, cfg: &DualConfig) -> bool {
    let vals = &ds.spectrum().values;
    (vals.min() - vals.max()).exp() < cfg.singular_ratio
}

/// A stationary point whose state is numerically singular is the limit of a
/// diverging sequence, not a full-rank solution.
fn finish(ds: DualState, iterations: usize, cfg: &DualConfig) -> Result<DualSolution> {
    if is_singular(&ds, cfg) {
        return Err(Error::NoFullRankSolution {
            lambda_norm: ds.lambda.norm(),
        });
    }
    Ok(DualSolution { state: ds, iterations })
}

fn divergence_error(ds: &DualState, cfg: &DualConfig, fallback: Error) -> Error {
    if is_singular(ds, cfg) {
        Error::NoFullRankSolution {
            lambda_norm: ds.lambda.norm(),
        }
    } else {
        fallback
    }
}

/// Damped Newton from `λ = 0`.
pub fn solve_dual(ob: &OrthonormalProblem, prior: &Prior, cfg: &DualConfig) -> Result<DualSolution> {
    let mut ds = dual_eval(ob, prior, &DVector::zeros(ob.m()))?;
    for it in 0..cfg.max_iter {
        if ds.grad.amax() <= cfg.tol {
            return finish(ds, it, cfg);
        }
        let h = dual_hessian(&ds, ob)?;
        let dir = newton_direction(h, &ds.grad, cfg.max_condition);
        let slope = ds.grad.dot(&dir);
        // J is a difference of O(1) terms; below this decrease Armijo only sees rounding
        let noise = 1e-14 * (1.0 + ds.rho_lambda.trace() + ds.lambda.dot(ob.f_bar()).abs());
        let mut t = 1.0;
        let next = loop {
            let trial = &ds.lambda + &dir * t;
            match dual_eval(ob, prior, &trial) {
                Ok(cand) if cand.j <= ds.j + cfg.ls_alpha * t * slope => break cand,
                Ok(cand) if -slope <= noise && cand.grad.amax() < ds.grad.amax() => break cand,
                Ok(_) | Err(Error::OverflowRisk { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= cfg.ls_beta;
            if t < 1e-20 {
                let stall = Error::LineSearchStall {
                    stage: STAGE,
                    step: t,
                    decrement: -slope,
                };
                return Err(divergence_error(&ds, cfg, stall));
            }
        };
        ds = next;
    }
    if ds.grad.amax() <= cfg.tol {
        return finish(ds, cfg.max_iter, cfg);
    }
    let cap = Error::IterationCapExceeded {
        stage: STAGE,
        iterations: cfg.max_iter,
        best: ds.grad.amax(),
    };
    Err(divergence_error(&ds, cfg, cap))
}

/// `S(ρ‖τ) = tr ρ (log ρ − log τ)` with `0 log 0 = 0`; eigenvalues of `ρ`
/// below zero are treated as zero.
pub fn relative_entropy(rho: &HermitianMatrix, prior: &Prior) -> Result<f64> {
    if rho.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            found: rho.dim(),
        });
    }
    let eig = rho.eigen()?;
    let neg_entropy: f64 = eig
        .values
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum();
    let cross = crate::hermitian::frobenius_inner(rho, prior.log_tau())?;
    Ok(neg_entropy - cross)
}
