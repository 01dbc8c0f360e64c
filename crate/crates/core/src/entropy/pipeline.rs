//! End-to-end estimation: feasibility, relaxation, reduction, dual solve.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{relative_entropy, solve_dual, DualConfig, Prior};
use crate::constraints::{apply_l, default_dep_tol, orthonormalize, ConstraintSet, OrthonormalProblem};
use crate::error::{Error, Result};
use crate::feasibility::{
    contraction_factor, default_amplification, minimal_kernel_solution_with, relax_isotropic, relax_weighted_problem,
    solve_min_eigen, BarrierConfig, Classification, FeasibilityReport, ProjectionConfig,
};
use crate::hermitian::HermitianMatrix;
use crate::reduction::{default_rank_tol, kernel_decomposition, reduce_problem};

/// Settings for [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub barrier: BarrierConfig,
    pub projection: ProjectionConfig,
    pub dual: DualConfig,
    /// Gram–Schmidt dependence threshold; `None` uses `1e-9·√n`.
    pub dep_tol: Option<f64>,
    /// Relax infeasible data instead of failing with [`Error::Infeasible`].
    #[serde(skip)]
    pub allow_relaxation: bool,
    /// Amplification for the weighted relaxation; `None` uses `2·max(1/d_i)`.
    pub amplification: Option<f64>,
    pub num_projections: usize,
    pub seed: u64,
    /// Largest accepted `‖L(ρ̂) − f̄‖_∞` on the (relaxed) data.
    pub constraint_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            barrier: BarrierConfig::default(),
            projection: ProjectionConfig::default(),
            dual: DualConfig::default(),
            dep_tol: None,
            allow_relaxation: true,
            amplification: None,
            num_projections: 8,
            seed: 0,
            constraint_tol: 1e-6,
        }
    }
}

/// Relaxation applied to infeasible data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    None,
    Isotropic { factor: f64 },
    Weighted { factor: f64, k: f64, mu_amplified: f64 },
}

impl Relaxation {
    pub fn factor(&self) -> Option<f64> {
        match *self {
            Relaxation::None => None,
            Relaxation::Isotropic { factor } | Relaxation::Weighted { factor, .. } => Some(factor),
        }
    }
}

/// Outcome of [`estimate`] with every branch taken.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub rho_hat: HermitianMatrix,
    /// Dual optimum of the problem that was finally solved (the reduced one
    /// when a reduction happened).
    pub lambda_opt: DVector<f64>,
    pub dual_value: f64,
    pub dual_iterations: usize,
    /// `S(ρ̂‖τ)`.
    pub relative_entropy: f64,
    /// `‖L(ρ̂) − f̄‖_∞` against the data actually imposed.
    pub residual_inf: f64,
    /// Support dimension when the problem was reduced.
    pub reduced_dim: Option<usize>,
    pub relaxation: Relaxation,
    /// Feasibility of the raw data.
    pub feasibility: FeasibilityReport,
    /// Feasibility of the relaxed data.
    pub relaxed_feasibility: Option<FeasibilityReport>,
    /// Orthonormal problem whose data `ρ̂` satisfies.
    pub problem: OrthonormalProblem,
}

impl EstimationResult {
    pub fn reduction_used(&self) -> bool {
        self.reduced_dim.is_some()
    }

    /// Estimates `tr(ρ̂ Z_i)` implied by the estimate.
    pub fn implied_estimates(&self, cs: &ConstraintSet) -> Result<Vec<f64>> {
        cs.evaluate(&self.rho_hat)
    }
}

/// Runs the estimation pipeline on raw constraints.
pub fn estimate(cs: &ConstraintSet, prior: &Prior, cfg: &PipelineConfig) -> Result<EstimationResult> {
    let n = cs.dim();
    if prior.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: prior.dim(),
        });
    }
    let ob = orthonormalize(cs, cfg.dep_tol.unwrap_or_else(|| default_dep_tol(n))).map_err(|e| e.at("orthonormalize"))?;
    let feasibility = solve_min_eigen(&ob, &cfg.barrier).map_err(|e| e.at("feasibility"))?;

    let (problem, report, relaxation, relaxed_feasibility) = match feasibility.classification {
        Classification::Infeasible => {
            if !cfg.allow_relaxation {
                return Err(Error::Infeasible { mu: feasibility.mu });
            }
            let (relaxed, relaxation) = match cs.reliability() {
                Some(d) => {
                    let k = cfg.amplification.unwrap_or_else(|| default_amplification(d));
                    let w = relax_weighted_problem(cs, &ob, k, &cfg.barrier).map_err(|e| e.at("relaxation"))?;
                    let relaxation = Relaxation::Weighted {
                        factor: w.factor,
                        k,
                        mu_amplified: w.mu_amplified,
                    };
                    (w.problem, relaxation)
                }
                None => {
                    let relaxed = relax_isotropic(&ob, &feasibility).map_err(|e| e.at("relaxation"))?;
                    let factor = contraction_factor(n, feasibility.mu);
                    (relaxed, Relaxation::Isotropic { factor })
                }
            };
            let report = solve_min_eigen(&relaxed, &cfg.barrier).map_err(|e| e.at("relaxed feasibility"))?;
            if report.classification == Classification::Infeasible {
                return Err(Error::Infeasible { mu: report.mu }.at("relaxed feasibility"));
            }
            (relaxed, report.clone(), relaxation, Some(report))
        }
        _ => (ob, feasibility.clone(), Relaxation::None, None),
    };

    let (rho_hat, dual, reduced_dim) = match report.classification {
        Classification::FeasibleSingular => {
            let mk = minimal_kernel_solution_with(&problem, &report, cfg.num_projections, cfg.seed, &cfg.projection)
                .map_err(|e| e.at("minimal kernel"))?;
            let rank_tol = default_rank_tol(&mk.rho)?;
            let kd = kernel_decomposition(&mk.rho, rank_tol).map_err(|e| e.at("kernel decomposition"))?;
            if kd.is_full_rank() {
                let sol = solve_dual(&problem, prior, &cfg.dual).map_err(|e| e.at("dual"))?;
                (sol.state.rho_lambda.clone(), sol, None)
            } else {
                let reduced = reduce_problem(&problem, &kd).map_err(|e| e.at("reduction"))?;
                let prior1 = prior.compressed(&kd.support()).map_err(|e| e.at("reduction"))?;
                let sol = solve_dual(reduced.inner(), &prior1, &cfg.dual).map_err(|e| e.at("reduced dual"))?;
                let rho = reduced.lift(&sol.state.rho_lambda)?;
                (rho, sol, Some(kd.n1()))
            }
        }
        _ => {
            let sol = solve_dual(&problem, prior, &cfg.dual).map_err(|e| e.at("dual"))?;
            (sol.state.rho_lambda.clone(), sol, None)
        }
    };

    let residual_inf = (apply_l(&problem, &rho_hat)? - problem.f_bar()).amax();
    if !(residual_inf <= cfg.constraint_tol) {
        return Err(Error::DegenerateInput(format!(
            "estimate violates the constraints by {residual_inf:e} (tolerance {:e})",
            cfg.constraint_tol
        ))
        .at("verification"));
    }
    let relative_entropy = relative_entropy(&rho_hat, prior)?;
    Ok(EstimationResult {
        rho_hat,
        lambda_opt: dual.state.lambda,
        dual_value: dual.state.j,
        dual_iterations: dual.iterations,
        relative_entropy,
        residual_inf,
        reduced_dim,
        relaxation,
        feasibility,
        relaxed_feasibility,
        problem,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{pauli_x, pauli_y, pauli_z};

    fn qubit(f2: f64) -> ConstraintSet {
        ConstraintSet::from_measurements(2, vec![pauli_z()], vec![f2]).unwrap()
    }

    fn close(a: &HermitianMatrix, diag: &[f64], tol: f64) -> bool {
        (a - &HermitianMatrix::from_real_diagonal(diag)).frobenius_norm() <= tol
    }

    #[test]
    fn full_rank_qubit() {
        let res = estimate(&qubit(0.5), &Prior::maxent(2), &PipelineConfig::default()).unwrap();
        assert!(close(&res.rho_hat, &[0.75, 0.25], 1e-8));
        assert_eq!(res.relaxation, Relaxation::None);
        assert!(!res.reduction_used());
        assert!(res.residual_inf < 1e-9);
    }

    #[test]
    fn infeasible_qubit_is_relaxed_and_reduced() {
        let res = estimate(&qubit(1.2), &Prior::maxent(2), &PipelineConfig::default()).unwrap();
        let factor = res.relaxation.factor().unwrap();
        assert!((factor - 1.0 / 1.2).abs() < 1e-9, "factor {factor}");
        assert_eq!(res.reduced_dim, Some(1));
        assert!(close(&res.rho_hat, &[1.0, 0.0], 1e-8));
    }

    #[test]
    fn pinned_qubit_is_reduced() {
        let res = estimate(&qubit(1.0), &Prior::maxent(2), &PipelineConfig::default()).unwrap();
        assert_eq!(res.relaxation, Relaxation::None);
        assert_eq!(res.feasibility.classification, Classification::FeasibleSingular);
        assert_eq!(res.reduced_dim, Some(1));
        assert!(close(&res.rho_hat, &[1.0, 0.0], 1e-8));
    }

    #[test]
    fn relaxation_can_be_refused() {
        let cfg = PipelineConfig {
            allow_relaxation: false,
            ..Default::default()
        };
        let err = estimate(&qubit(1.2), &Prior::maxent(2), &cfg).unwrap_err();
        assert!(matches!(err.root(), Error::Infeasible { .. }));
    }

    #[test]
    fn weighted_relaxation_in_pipeline() {
        let cs = ConstraintSet::from_measurements(2, vec![pauli_x(), pauli_y()], vec![0.9, 0.9])
            .unwrap()
            .with_reliability(vec![1.0, 0.5])
            .unwrap();
        let res = estimate(&cs, &Prior::maxent(2), &PipelineConfig::default()).unwrap();
        assert!(matches!(res.relaxation, Relaxation::Weighted { .. }));
        assert_eq!(res.reduced_dim, Some(1));
        let implied = res.implied_estimates(&cs).unwrap();
        assert!(implied[1] / 0.9 > implied[2] / 0.9);
        assert!((res.rho_hat.trace() - 1.0).abs() < 1e-8);
    }
}
