//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qre_core::constraints::{default_dep_tol, orthonormalize, ConstraintSet, OrthonormalProblem};
use qre_core::hermitian::{pauli_z, HermitianMatrix};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cnormal(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> HermitianMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| cnormal(rng));
    HermitianMatrix::new((&g + g.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
}

/// Full-rank state `GG†/tr` with `G` square, shifted so `λ_min ≥ floor`.
pub fn random_state(rng: &mut impl Rng, n: usize, floor: f64) -> HermitianMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| cnormal(rng));
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= Complex64::new(tr, 0.0);
    let mixed = m * Complex64::new(1.0 - n as f64 * floor, 0.0)
        + DMatrix::<Complex64>::identity(n, n) * Complex64::new(floor, 0.0);
    HermitianMatrix::new(mixed).unwrap()
}

/// `tr(AB)` straight from the matrix product.
pub fn tr_product(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    (a.as_matrix() * b.as_matrix()).trace().re
}

/// Eigenvalues in ascending order from an independent real embedding:
/// `A = B + iC` has the real symmetric image `[[B, −C], [C, B]]`, whose
/// spectrum is that of `A` with every value doubled.
pub fn spectrum(a: &HermitianMatrix) -> Vec<f64> {
    let n = a.dim();
    let m = a.as_matrix();
    let big = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = m[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut vals: Vec<f64> = big.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals.into_iter().step_by(2).collect()
}

pub fn min_eig(a: &HermitianMatrix) -> f64 {
    spectrum(a)[0]
}

pub fn trace_distance(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    0.5 * spectrum(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

pub fn diag(d: &[f64]) -> HermitianMatrix {
    HermitianMatrix::from_real_diagonal(d)
}

pub fn dist(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    (a - b).frobenius_norm()
}

pub fn qubit_cs(f2: f64) -> ConstraintSet {
    ConstraintSet::from_measurements(2, vec![pauli_z()], vec![f2]).unwrap()
}

pub fn ortho(cs: &ConstraintSet) -> OrthonormalProblem {
    orthonormalize(cs, default_dep_tol(cs.dim())).unwrap()
}

/// Constraints measured exactly on a random full-rank state with `extra`
/// random observables.
pub fn random_feasible(rng: &mut impl Rng, n: usize, extra: usize) -> (ConstraintSet, HermitianMatrix) {
    let rho = random_state(rng, n, 0.02);
    let z: Vec<HermitianMatrix> = (0..extra).map(|_| random_hermitian(rng, n)).collect();
    let f: Vec<f64> = z.iter().map(|zi| tr_product(&rho, zi)).collect();
    (ConstraintSet::from_measurements(n, z, f).unwrap(), rho)
}

/// Grid oracle for the qubit `Z = [I, σ_z]` problem: `μ = −√2 · max_w
/// λ_min(ρ̃₀ + w_x σ_x/√2 + w_y σ_y/√2)`, maximized over a grid.
pub fn qubit_mu_grid(f2: f64) -> f64 {
    let a = 0.5 * (1.0 + f2);
    let b = 0.5 * (1.0 - f2);
    let mut best = f64::NEG_INFINITY;
    let steps = 200;
    for i in 0..=steps {
        for j in 0..=steps {
            let wx = -1.0 + 2.0 * i as f64 / steps as f64;
            let wy = -1.0 + 2.0 * j as f64 / steps as f64;
            // eigenvalues of [[a, c], [c*, b]] with |c| = |w|/√2
            let c2 = 0.5 * (wx * wx + wy * wy);
            let lo = 0.5 * (a + b) - (0.25 * (a - b).powi(2) + c2).sqrt();
            best = best.max(lo);
        }
    }
    -SQRT2 * best
}

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

/// Central differences of a vector function; column `i` is `∂g/∂x_i`.
pub fn fd_jacobian(g: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = (0..x.len())
        .map(|i| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (g(&xp) - g(&xm)) / (2.0 * h)
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// Feasible states on random chords through a positive definite solution:
/// `ρ + t Σ c_j Y_j` with `t` uniform over the interval keeping the state
/// positive semidefinite.
pub fn chord_samples(ob: &OrthonormalProblem, center: &HermitianMatrix, count: usize, rng: &mut impl Rng) -> Vec<HermitianMatrix> {
    let n = ob.dim();
    let mut out = Vec::with_capacity(count);
    if ob.y().is_empty() {
        return vec![center.clone(); count];
    }
    // center^{-1/2} for the generalized eigenproblem
    let eig = center.eigen().unwrap();
    let s = eig.map(|x| 1.0 / x.sqrt());
    while out.len() < count {
        let mut d = HermitianMatrix::zeros(n);
        for y in ob.y() {
            d.axpy(rng.sample::<f64, _>(StandardNormal), y);
        }
        let w = HermitianMatrix::new(s.as_matrix() * d.as_matrix() * s.as_matrix()).unwrap();
        let vals = spectrum(&w);
        // center + t d ⪰ 0  ⇔  1 + t ω ≥ 0 for every ω
        let hi = vals.iter().filter(|w| **w < 0.0).map(|w| -1.0 / w).fold(f64::INFINITY, f64::min);
        let lo = vals.iter().filter(|w| **w > 0.0).map(|w| -1.0 / w).fold(f64::NEG_INFINITY, f64::max);
        if !hi.is_finite() || !lo.is_finite() {
            continue;
        }
        let t = lo + (hi - lo) * rng.random::<f64>();
        let mut sample = center.clone();
        sample.axpy(t, &d);
        out.push(sample);
    }
    out
}
