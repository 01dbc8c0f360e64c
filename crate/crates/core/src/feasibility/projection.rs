//! Frobenius projections onto the solution set and minimal-kernel solutions.
//!
//! On a singular problem the solution set has empty interior and alternating
//! projections in the full space slow down to sublinear rates. The support
//! shared by the maximal-rank solutions is therefore read off the barrier's
//! central path first: along the path the eigenvalues of `H(v(q))` in kernel
//! directions shrink like `1/q`, the others stay put. The projections then
//! run on the face `{W σ W† : σ ⪰ 0}`, where a positive definite solution
//! exists.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::barrier::Pencil;
use super::{solve_min_eigen, BarrierConfig, Classification, FeasibilityReport};
use crate::constraints::OrthonormalProblem;
use crate::error::{Error, Result};
use crate::hermitian::{project_psd, HermitianMatrix};
use crate::reduction::{decomposition_from_support, lift_solution, reduce_problem_with, REDUCED_DEP_TOL};

/// Dykstra iteration and support detection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// Stop once successive iterates differ by at most this (Frobenius).
    pub tol: f64,
    pub max_iter: usize,
    /// Path eigenvalues below `kernel_magnitude · n/q` count as kernel
    /// directions even when their decay has flattened.
    pub kernel_magnitude: f64,
    pub reduced_dep_tol: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50_000,
            kernel_magnitude: 1e3,
            reduced_dep_tol: REDUCED_DEP_TOL,
        }
    }
}

/// One Frobenius projection.
#[derive(Debug, Clone)]
pub struct Projection {
    pub rho: HermitianMatrix,
    pub iterations: usize,
    pub change: f64,
}

/// Dykstra's alternating projections between the PSD cone and the affine set
/// `{ρ : L(ρ) = f̄}`, started at `start`.
///
/// The affine set needs no correction term, so only the cone increment is
/// carried. The returned matrix lies on the affine set.
pub fn project_onto_solutions(
    ob: &OrthonormalProblem,
    start: &HermitianMatrix,
    cfg: &ProjectionConfig,
) -> Result<Projection> {
    let mut x = ob.project_affine(start)?;
    let mut p = HermitianMatrix::zeros(ob.dim());
    let mut change = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let xp = &x + &p;
        let y = project_psd(&xp)?;
        p = &xp - &y;
        let next = ob.project_affine(&y)?;
        change = (&next - &x).frobenius_norm();
        x = next;
        if change <= cfg.tol {
            return Ok(Projection {
                rho: x,
                iterations: it,
                change,
            });
        }
    }
    Err(Error::ProjectionNonConvergence {
        iterations: cfg.max_iter,
        change,
    })
}

/// Orthonormal basis (n×r) of the support of the maximal-rank solutions,
/// read off the last centered points of the barrier path.
pub fn central_path_support(
    ob: &OrthonormalProblem,
    report: &FeasibilityReport,
    cfg: &ProjectionConfig,
) -> Result<DMatrix<Complex64>> {
    let n = ob.dim();
    let last = report
        .path
        .last()
        .ok_or_else(|| Error::DegenerateInput("barrier path is empty".into()))?;
    let pencil = Pencil::new(ob);
    let eig = pencil.eval(&last.v).eigen()?;
    let floor = cfg.kernel_magnitude * n as f64 / last.q;

    let back = report.path.len().saturating_sub(1).min(3);
    let earlier = (back > 0)
        .then(|| -> Result<_> {
            let pt = &report.path[report.path.len() - 1 - back];
            Ok((pencil.eval(&pt.v).eigen()?, (pt.q / last.q).sqrt()))
        })
        .transpose()?;

    // kernel directions are the smallest eigenvalues
    let mut kernel = 0;
    while kernel < n - 1 {
        let lam = eig.values[kernel];
        let decays = earlier
            .as_ref()
            .is_some_and(|(prev, threshold)| lam < threshold * prev.values[kernel]);
        if !(decays || lam <= floor) {
            break;
        }
        kernel += 1;
    }
    Ok(eig.vectors.columns(kernel, n - kernel).into_owned())
}

/// Averaged projections together with the support used.
#[derive(Debug, Clone)]
pub struct MinimalKernel {
    pub rho: HermitianMatrix,
    /// Support basis when the projections ran on a face.
    pub support: Option<DMatrix<Complex64>>,
    pub projections: Vec<Projection>,
}

/// Minimal-kernel solution with default settings; solves the feasibility
/// problem first.
pub fn minimal_kernel_solution(ob: &OrthonormalProblem, num_projections: usize, seed: u64) -> Result<HermitianMatrix> {
    let report = solve_min_eigen(ob, &BarrierConfig::default())?;
    Ok(minimal_kernel_solution_with(ob, &report, num_projections, seed, &ProjectionConfig::default())?.rho)
}

/// Averages `num_projections` Frobenius projections of seeded random points
/// `ρ̃₀ + Σ u_j Y_j` onto the solution set.
///
/// Projection `j` draws its coefficients from stream `j` of a ChaCha
/// generator keyed by `seed`, so the result does not depend on scheduling.
pub fn minimal_kernel_solution_with(
    ob: &OrthonormalProblem,
    report: &FeasibilityReport,
    num_projections: usize,
    seed: u64,
    cfg: &ProjectionConfig,
) -> Result<MinimalKernel> {
    if num_projections == 0 {
        return Err(Error::DegenerateInput("num_projections must be positive".into()));
    }
    let (target, support) = match report.classification {
        Classification::Infeasible => return Err(Error::Infeasible { mu: report.mu }),
        Classification::FeasibleFullRank => (ob.clone(), None),
        Classification::FeasibleSingular => {
            let w = central_path_support(ob, report, cfg)?;
            let kd = decomposition_from_support(&w)?;
            let reduced = reduce_problem_with(ob, &kd, cfg.reduced_dep_tol)?;
            (reduced.inner().clone(), Some(kd))
        }
    };

    let k = target.y().len();
    let projections = (0..num_projections)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let u: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            let start = target.affine_point(&u)?;
            project_onto_solutions(&target, &start, cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sum = HermitianMatrix::zeros(target.dim());
    for p in &projections {
        sum.axpy(1.0, &p.rho);
    }
    let mean = sum.scale(1.0 / num_projections as f64);
    let rho = match &support {
        Some(kd) => lift_solution(&mean, kd)?,
        None => mean,
    };
    Ok(MinimalKernel {
        rho,
        support: support.map(|kd| kd.support()),
        projections,
    })
}

/// Number of eigenvalues above `n · 1e-9 · ‖ρ‖₂`.
pub fn numerical_rank(rho: &HermitianMatrix) -> Result<usize> {
    let eig = rho.eigen()?;
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = rho.dim() as f64 * 1e-9 * scale;
    Ok(eig.values.iter().filter(|v| **v > tol).count())
}
