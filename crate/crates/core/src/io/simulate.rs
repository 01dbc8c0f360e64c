//! Synthetic tomography data.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::format::{hermitian_to_literal, literal_to_hermitian, MatrixLiteral, NamedMatrix, PriorSpec, ProblemFile};
use crate::entropy::PipelineConfig;
use crate::error::{Error, Result};
use crate::hermitian::{frobenius_inner, HermitianMatrix};

/// Tolerance for probability clipping and POVM completeness.
pub const PROBABILITY_TOL: f64 = 1e-10;

/// What is measured on each of the `shots` copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Measurement {
    /// Each observable is measured `shots` times in its eigenbasis and the
    /// outcome average is reported.
    Observables(Vec<NamedMatrix>),
    /// A single POVM measured `shots` times; outcome frequencies are
    /// reported.
    Povm(Vec<NamedMatrix>),
}

/// Input of the `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub true_state: MatrixLiteral,
    pub measurement: Measurement,
    pub shots: u64,
    pub seed: u64,
}

/// Simulated data.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    /// One estimate per observable or POVM effect.
    pub estimates: Vec<f64>,
    /// Empirical outcome frequencies: per observable over its eigenbasis,
    /// or a single row for a POVM.
    pub frequencies: Vec<Vec<f64>>,
    /// Single-shot sample variance behind each estimate.
    pub variances: Vec<f64>,
}

fn validate_state(rho: &HermitianMatrix) -> Result<()> {
    if (rho.trace() - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::InvalidMatrix(format!("true_state: trace {} is not 1", rho.trace())));
    }
    let lo = rho.min_eigenvalue()?;
    if lo < -PROBABILITY_TOL {
        return Err(Error::InvalidMatrix(format!("true_state: eigenvalue {lo:e} is negative")));
    }
    Ok(())
}

/// Clips tiny negative or above-one probabilities and renormalizes drift.
pub fn clip_probabilities(p: &mut [f64]) -> Result<()> {
    for x in p.iter_mut() {
        if *x < -PROBABILITY_TOL {
            return Err(Error::NegativeProbability { probability: *x });
        }
        *x = x.clamp(0.0, 1.0);
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_TOL {
        p.iter_mut().for_each(|x| *x /= total);
    }
    Ok(())
}

/// Multinomial counts through sequential conditional binomials.
fn multinomial(rng: &mut impl Rng, shots: u64, p: &[f64]) -> Vec<u64> {
    let mut remaining = shots;
    let mut mass = 1.0;
    let mut counts = Vec::with_capacity(p.len());
    for (k, &pk) in p.iter().enumerate() {
        let c = if k + 1 == p.len() || remaining == 0 {
            remaining
        } else {
            let q = (pk / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        counts.push(c);
        remaining -= c;
        mass -= pk;
        if mass <= 0.0 {
            mass = f64::MIN_POSITIVE;
        }
    }
    counts
}

fn frequencies(counts: &[u64], shots: u64) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / shots as f64).collect()
}

/// Draws measurement data for `spec`.
pub fn simulate_measurements(spec: &SimulationSpec) -> Result<SimulationOutcome> {
    if spec.shots == 0 {
        return Err(Error::InvalidConstraints("shots: must be positive".into()));
    }
    let n = spec.true_state.len();
    let rho = literal_to_hermitian(&spec.true_state, n, "true_state")?;
    validate_state(&rho)?;
    let k = spec.shots;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    match &spec.measurement {
        Measurement::Povm(effects) => {
            let q = effects
                .iter()
                .enumerate()
                .map(|(i, e)| literal_to_hermitian(&e.matrix, n, &format!("povm[{i}] ({})", e.name)))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::InvalidPovm(e.to_string()))?;
            validate_povm(&q)?;
            let mut p = q.iter().map(|e| frobenius_inner(&rho, e)).collect::<Result<Vec<_>>>()?;
            clip_probabilities(&mut p)?;
            let freq = frequencies(&multinomial(&mut rng, k, &p), k);
            let variances = freq.iter().map(|f| f * (1.0 - f)).collect();
            Ok(SimulationOutcome {
                estimates: freq.clone(),
                frequencies: vec![freq],
                variances,
            })
        }
        Measurement::Observables(obs) => {
            let mut estimates = Vec::with_capacity(obs.len());
            let mut all_freq = Vec::with_capacity(obs.len());
            let mut variances = Vec::with_capacity(obs.len());
            for (i, o) in obs.iter().enumerate() {
                let m = literal_to_hermitian(&o.matrix, n, &format!("observables[{i}] ({})", o.name))?;
                let eig = m.eigen()?;
                let mut p: Vec<f64> = (0..n)
                    .map(|j| {
                        let v = eig.vectors.column(j);
                        (v.adjoint() * rho.as_matrix() * v)[(0, 0)].re
                    })
                    .collect();
                clip_probabilities(&mut p)?;
                rng.set_stream(i as u64 + 1);
                let freq = frequencies(&multinomial(&mut rng, k, &p), k);
                let mean: f64 = freq.iter().zip(eig.values.iter()).map(|(f, o)| f * o).sum();
                let second: f64 = freq.iter().zip(eig.values.iter()).map(|(f, o)| f * o * o).sum();
                estimates.push(mean);
                variances.push((second - mean * mean).max(0.0));
                all_freq.push(freq);
            }
            Ok(SimulationOutcome {
                estimates,
                frequencies: all_freq,
                variances,
            })
        }
    }
}

fn validate_povm(q: &[HermitianMatrix]) -> Result<()> {
    let n = q.first().map(HermitianMatrix::dim).ok_or_else(|| Error::InvalidPovm("no effects".into()))?;
    let mut sum = HermitianMatrix::zeros(n);
    for (i, e) in q.iter().enumerate() {
        let lo = e.min_eigenvalue()?;
        if lo < -PROBABILITY_TOL {
            return Err(Error::InvalidPovm(format!("effect {i} has eigenvalue {lo:e}")));
        }
        sum.axpy(1.0, e);
    }
    let defect = (&sum - &HermitianMatrix::identity(n)).frobenius_norm();
    if defect > PROBABILITY_TOL {
        return Err(Error::InvalidPovm(format!("effects sum to I only within {defect:e}")));
    }
    Ok(())
}

/// Reliability indexes from single-shot variances: the reciprocal variance
/// of each estimate normalized so the most precise gets 1. Variances are
/// floored at `1/shots`, the resolution of one count, so deterministic
/// outcomes do not produce infinite weight.
pub fn reliability_from_variances(variances: &[f64], shots: u64) -> Vec<f64> {
    let floor = 1.0 / shots as f64;
    let v: Vec<f64> = variances.iter().map(|x| x.max(floor)).collect();
    let best = v.iter().copied().fold(f64::INFINITY, f64::min);
    v.iter().map(|x| (best / x).min(1.0)).collect()
}

/// Problem file for `estimate` built from simulated data.
pub fn simulated_problem(spec: &SimulationSpec, outcome: &SimulationOutcome, with_reliability: bool) -> ProblemFile {
    let observables = match &spec.measurement {
        Measurement::Observables(o) | Measurement::Povm(o) => o.clone(),
    };
    ProblemFile {
        dimension: spec.true_state.len(),
        observables,
        estimates: outcome.estimates.clone(),
        reliability: with_reliability.then(|| reliability_from_variances(&outcome.variances, spec.shots)),
        prior: PriorSpec::default(),
        options: PipelineConfig {
            seed: spec.seed,
            ..Default::default()
        },
    }
}

/// `G G† / tr(G G†)` for an n×rank matrix `G` of i.i.d. complex standard
/// normals.
pub fn random_density(n: usize, rank: usize, seed: u64) -> Result<HermitianMatrix> {
    if n == 0 || rank == 0 || rank > n {
        return Err(Error::InvalidRank { rank, dim: n });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, rank, |_, _| {
        Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    let rho = HermitianMatrix::new(&g * g.adjoint())?;
    let tr = rho.trace();
    Ok(rho.scale(1.0 / tr))
}

/// Named Pauli observables for a qubit.
pub fn pauli_observables() -> Vec<NamedMatrix> {
    use crate::hermitian::{pauli_x, pauli_y, pauli_z};
    [("sx", pauli_x()), ("sy", pauli_y()), ("sz", pauli_z())]
        .into_iter()
        .map(|(name, m)| NamedMatrix {
            name: name.into(),
            matrix: hermitian_to_literal(&m),
        })
        .collect()
}
