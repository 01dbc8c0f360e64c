//! Feasibility analysis, constraint relaxation and minimal-kernel solutions.

mod barrier;
mod projection;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use barrier::{solve_min_eigen, solve_min_eigen_observed, PathPoint};
pub use projection::{
    central_path_support, minimal_kernel_solution, minimal_kernel_solution_with, numerical_rank,
    project_onto_solutions, MinimalKernel, Projection, ProjectionConfig,
};

use crate::constraints::{ConstraintSet, OrthonormalProblem};
use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;

/// Barrier-method parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    /// Initial barrier weight.
    pub q0: f64,
    /// Growth factor of the barrier weight between outer stages.
    pub beta: f64,
    /// Target accuracy; the loop stops once `n/q < xi`.
    pub xi: f64,
    /// Inner stop on half the squared Newton decrement.
    pub newton_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub ls_alpha: f64,
    pub ls_beta: f64,
    /// Half-width of the band around zero classified as singular.
    pub zero_tol: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            q0: 10.0,
            beta: 1.5,
            xi: 1e-10,
            newton_tol: 1e-10,
            max_outer: 200,
            max_inner: 100,
            ls_alpha: 0.25,
            ls_beta: 0.5,
            zero_tol: 1e-6,
        }
    }
}

impl BarrierConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConstraints(format!("barrier config: {what}")));
        if !(self.q0 > 0.0) {
            return bad("q0 must be positive");
        }
        if !(self.beta > 1.0) {
            return bad("beta must exceed 1");
        }
        if !(self.xi > 0.0) {
            return bad("xi must be positive");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol must be positive");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration caps must be positive");
        }
        if !(self.ls_alpha > 0.0 && self.ls_alpha < 0.5) {
            return bad("ls_alpha must lie in (0, 0.5)");
        }
        if !(self.ls_beta > 0.0 && self.ls_beta < 1.0) {
            return bad("ls_beta must lie in (0, 1)");
        }
        if !(self.zero_tol >= 0.0) {
            return bad("zero_tol must be non-negative");
        }
        Ok(())
    }
}

/// Outcome of the sign test on `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Infeasible,
    FeasibleFullRank,
    FeasibleSingular,
}

/// Result of [`solve_min_eigen`].
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// Optimal value of the minimum-eigenvalue problem (upper bound within
    /// `accuracy`).
    pub mu: f64,
    pub classification: Classification,
    /// Minimizer `(v_1, …, v_{n²−m}, v_last)`.
    pub witness_v: DVector<f64>,
    /// `H(witness_v)`.
    pub witness_matrix: HermitianMatrix,
    /// Certified gap `n/q` of the final stage.
    pub accuracy: f64,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    /// Centered points, one per outer stage.
    pub path: Vec<PathPoint>,
}

/// Three-way sign test with a band of half-width `zero_tol` around zero.
pub fn classify(mu: f64, zero_tol: f64) -> Classification {
    if mu > zero_tol {
        Classification::Infeasible
    } else if mu < -zero_tol {
        Classification::FeasibleFullRank
    } else {
        Classification::FeasibleSingular
    }
}

/// Uniform contraction `1/(1 + √n μ)` applied to the traceless data.
pub fn contraction_factor(n: usize, mu: f64) -> f64 {
    1.0 / (1.0 + (n as f64).sqrt() * mu)
}

/// Contracts `f̄_2..f̄_m` by `1/(1 + √n μ)`; the trace datum is unchanged.
pub fn relax_isotropic(ob: &OrthonormalProblem, report: &FeasibilityReport) -> Result<OrthonormalProblem> {
    if !(report.mu > 0.0) {
        return Err(Error::NotInfeasible { mu: report.mu });
    }
    let factor = contraction_factor(ob.dim(), report.mu);
    let mut f_bar = ob.f_bar().clone();
    for fi in f_bar.iter_mut().skip(1) {
        *fi *= factor;
    }
    ob.with_f_bar(f_bar)
}

/// Smallest admissible amplification, `max(1/d_i)`.
pub fn min_amplification(d: &[f64]) -> f64 {
    d.iter().map(|x| 1.0 / x).fold(f64::NEG_INFINITY, f64::max)
}

/// Default amplification `2·max(1/d_i)`.
pub fn default_amplification(d: &[f64]) -> f64 {
    2.0 * min_amplification(d)
}

/// Amplifies `f̂_i ← k d_i f̂_i` for i ≥ 2.
pub fn relax_weighted(cs: &ConstraintSet, k: f64) -> Result<ConstraintSet> {
    let d = cs.reliability().ok_or(Error::MissingReliability)?;
    let min = min_amplification(d);
    if !(k > min) {
        return Err(Error::KTooSmall { k, min });
    }
    let mut f = cs.estimates().to_vec();
    for (fi, di) in f.iter_mut().skip(1).zip(d) {
        *fi *= k * di;
    }
    cs.with_estimates(f)
}

/// Outcome of the reliability-weighted relaxation.
#[derive(Debug, Clone)]
pub struct WeightedRelaxation {
    pub problem: OrthonormalProblem,
    pub amplified: ConstraintSet,
    pub k: f64,
    /// `mu'` of the amplified problem.
    pub mu_amplified: f64,
    /// `1/(1 + √n mu')`.
    pub factor: f64,
}

/// Amplifies by reliability, re-solves the minimum-eigenvalue problem on the
/// amplified data through the stored transform `T`, then contracts.
pub fn relax_weighted_problem(
    cs: &ConstraintSet,
    ob: &OrthonormalProblem,
    k: f64,
    cfg: &BarrierConfig,
) -> Result<WeightedRelaxation> {
    let amplified = relax_weighted(cs, k)?;
    let ob_amp = ob.with_estimates(amplified.estimates())?;
    let report = solve_min_eigen(&ob_amp, cfg)?;
    if !(report.mu > 0.0) {
        return Err(Error::AmplificationTooWeak { mu: report.mu });
    }
    let problem = relax_isotropic(&ob_amp, &report)?;
    Ok(WeightedRelaxation {
        problem,
        amplified,
        k,
        mu_amplified: report.mu,
        factor: contraction_factor(ob.dim(), report.mu),
    })
}
