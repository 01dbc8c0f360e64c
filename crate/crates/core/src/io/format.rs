//! JSON problem files and result documents.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays. The trace constraint is implicit: `observables` lists only the
//! measured `Z_2..Z_p`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constraints::ConstraintSet;
use crate::entropy::{EstimationResult, PipelineConfig, Prior, Relaxation};
use crate::error::{Error, Result};
use crate::feasibility::{Classification, FeasibilityReport};
use crate::hermitian::HermitianMatrix;

/// Row-major matrix of `[re, im]` pairs.
pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

/// Largest accepted `‖A − A†‖_F / (1 + ‖A‖_F)` for input matrices.
const HERMITICITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMatrix {
    pub name: String,
    pub matrix: MatrixLiteral,
}

/// Prior given either as the keyword `"maxent"` or as a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Keyword(String),
    Matrix(MatrixLiteral),
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Keyword("maxent".into())
    }
}

/// Estimation problem as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    #[serde(default)]
    pub observables: Vec<NamedMatrix>,
    #[serde(default)]
    pub estimates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reliability: Option<Vec<f64>>,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub options: PipelineConfig,
}

pub fn matrix_to_literal(m: &DMatrix<Complex64>) -> MatrixLiteral {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn hermitian_to_literal(h: &HermitianMatrix) -> MatrixLiteral {
    matrix_to_literal(h.as_matrix())
}

/// Parses a matrix literal of dimension `n`; `what` names the field in
/// error messages.
pub fn literal_to_hermitian(lit: &MatrixLiteral, n: usize, what: &str) -> Result<HermitianMatrix> {
    if lit.len() != n {
        return Err(Error::InvalidMatrix(format!("{what}: {} rows, expected {n}", lit.len())));
    }
    let mut m = DMatrix::zeros(n, n);
    for (r, row) in lit.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidMatrix(format!(
                "{what}: row {r} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (c, z) in row.iter().enumerate() {
            m[(r, c)] = Complex64::new(z[0], z[1]);
        }
    }
    let asym = (&m - m.adjoint()).norm();
    if !(asym <= HERMITICITY_TOL * (1.0 + m.norm())) {
        return Err(Error::InvalidMatrix(format!(
            "{what}: not Hermitian (‖A − A†‖_F = {asym:e})"
        )));
    }
    HermitianMatrix::new(m).map_err(|e| Error::InvalidMatrix(format!("{what}: {e}")))
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConstraints(format!("problem file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    /// Builds the constraint set, prepending the trace constraint.
    pub fn constraint_set(&self) -> Result<ConstraintSet> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::InvalidConstraints("dimension: must be at least 1".into()));
        }
        if self.estimates.len() != self.observables.len() {
            return Err(Error::InvalidConstraints(format!(
                "estimates: {} values for {} observables",
                self.estimates.len(),
                self.observables.len()
            )));
        }
        let z = self
            .observables
            .iter()
            .enumerate()
            .map(|(i, o)| literal_to_hermitian(&o.matrix, n, &format!("observables[{i}] ({})", o.name)))
            .collect::<Result<Vec<_>>>()?;
        let cs = ConstraintSet::from_measurements(n, z, self.estimates.clone())?;
        match &self.reliability {
            Some(d) => cs.with_reliability(d.clone()),
            None => Ok(cs),
        }
    }

    pub fn prior(&self) -> Result<Prior> {
        match &self.prior {
            PriorSpec::Keyword(k) if k == "maxent" => Ok(Prior::maxent(self.dimension)),
            PriorSpec::Keyword(k) => Err(Error::InvalidConstraints(format!(
                "prior: unknown keyword {k:?}, expected \"maxent\" or a matrix"
            ))),
            PriorSpec::Matrix(lit) => {
                let tau = literal_to_hermitian(lit, self.dimension, "prior")?;
                Prior::new(tau).map_err(|e| Error::InvalidConstraints(format!("prior: {e}")))
            }
        }
    }
}

fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::Infeasible => "Infeasible",
        Classification::FeasibleFullRank => "FeasibleFullRank",
        Classification::FeasibleSingular => "FeasibleSingular",
    }
}

pub fn feasibility_json(r: &FeasibilityReport) -> Value {
    json!({
        "mu": r.mu,
        "classification": classification_name(r.classification),
        "accuracy": r.accuracy,
        "witness_v": r.witness_v.as_slice(),
        "witness_matrix": hermitian_to_literal(&r.witness_matrix),
        "outer_iterations": r.outer_iterations,
        "newton_iterations": r.newton_iterations,
    })
}

pub fn relaxation_json(r: &Relaxation) -> Value {
    match *r {
        Relaxation::None => json!({ "kind": "none" }),
        Relaxation::Isotropic { factor } => json!({ "kind": "isotropic", "factor": factor }),
        Relaxation::Weighted {
            factor,
            k,
            mu_amplified,
        } => json!({ "kind": "weighted", "factor": factor, "k": k, "mu_amplified": mu_amplified }),
    }
}

pub fn estimation_json(res: &EstimationResult, cs: &ConstraintSet) -> Result<Value> {
    let implied = res.implied_estimates(cs)?;
    Ok(json!({
        "rho_hat": hermitian_to_literal(&res.rho_hat),
        "lambda_opt": res.lambda_opt.as_slice(),
        "dual_value": res.dual_value,
        "dual_iterations": res.dual_iterations,
        "relative_entropy": res.relative_entropy,
        "residual_inf": res.residual_inf,
        "implied_estimates": &implied[1..],
        "reduction": { "used": res.reduction_used(), "n1": res.reduced_dim },
        "relaxation": relaxation_json(&res.relaxation),
        "feasibility": feasibility_json(&res.feasibility),
        "relaxed_feasibility": res.relaxed_feasibility.as_ref().map(feasibility_json),
    }))
}

/// Rounds every number in `v` to `digits` significant digits.
pub fn round_significant(v: &mut Value, digits: usize) {
    match v {
        Value::Number(num) => {
            if let Some(x) = num.as_f64().filter(|_| num.is_f64()) {
                let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
                    .parse()
                    .expect("formatted float parses");
                if let Some(n) = serde_json::Number::from_f64(rounded) {
                    *num = n;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_significant(x, digits)),
        Value::Object(map) => map.values_mut().for_each(|x| round_significant(x, digits)),
        _ => {}
    }
}
