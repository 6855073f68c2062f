//! Structured results of physicality checks.

use crate::algebra::{LabeledOperator, HERMITICITY_TOL, PSD_TOL};

/// Outcome of one constraint evaluated at one index key.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Descriptive constraint name, e.g. `forward-causality`.
    pub constraint: String,
    /// Which element or slice was tested, e.g. `s0/a1` or `u0`.
    pub key: String,
    /// Frobenius norm of the residual operator, `|scalar residual|`, or
    /// `max(0, -λ_min)` for positivity.
    pub residual: f64,
    /// Largest absolute entry of the residual.
    pub max_abs: f64,
    /// Present for positivity checks.
    pub min_eigenvalue: Option<f64>,
    pub passed: bool,
}

/// Every check performed on a family. The family is accepted iff every entry
/// of `checks` passed; `diagnostics` are informational only.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub subject: String,
    pub tolerance: f64,
    pub checks: Vec<Check>,
    pub diagnostics: Vec<Check>,
}

impl ValidationReport {
    pub fn new(subject: impl Into<String>, tolerance: f64) -> Self {
        Self {
            subject: subject.into(),
            tolerance,
            checks: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// The check with the largest residual for `constraint`.
    pub fn worst(&self, constraint: &str) -> Option<&Check> {
        self.checks
            .iter()
            .filter(|c| c.constraint == constraint)
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
    }

    pub fn find(&self, constraint: &str, key: &str) -> Option<&Check> {
        self.checks
            .iter()
            .chain(&self.diagnostics)
            .find(|c| c.constraint == constraint && c.key == key)
    }

    /// Records a residual operator that must vanish.
    pub fn push_operator(&mut self, constraint: &str, key: &str, residual: &LabeledOperator) {
        let fro = residual.frobenius_norm();
        self.checks.push(Check {
            constraint: constraint.into(),
            key: key.into(),
            residual: fro,
            max_abs: residual.max_abs(),
            min_eigenvalue: None,
            passed: fro <= self.tolerance,
        });
    }

    /// Records a scalar residual that must vanish.
    pub fn push_scalar(&mut self, constraint: &str, key: &str, residual: f64) {
        self.checks.push(Check {
            constraint: constraint.into(),
            key: key.into(),
            residual: residual.abs(),
            max_abs: residual.abs(),
            min_eigenvalue: None,
            passed: residual.abs() <= self.tolerance,
        });
    }

    /// Records an eigenvalue lower bound check against `psd_tol`.
    pub fn push_positivity(&mut self, key: &str, min_eigenvalue: f64, psd_tol: f64) {
        let violation = (-min_eigenvalue).max(0.0);
        self.checks.push(Check {
            constraint: "positivity".into(),
            key: key.into(),
            residual: violation,
            max_abs: violation,
            min_eigenvalue: Some(min_eigenvalue),
            passed: min_eigenvalue >= -psd_tol,
        });
    }

    /// Records the largest entrywise Hermiticity deviation.
    pub fn push_hermiticity(&mut self, key: &str, deviation: f64, herm_tol: f64) {
        self.checks.push(Check {
            constraint: "hermiticity".into(),
            key: key.into(),
            residual: deviation,
            max_abs: deviation,
            min_eigenvalue: None,
            passed: deviation <= herm_tol,
        });
    }

    /// Hermiticity and positivity of one element. Positivity is evaluated on
    /// the Hermitian part so that a non-Hermitian input still gets a number.
    pub fn push_element(&mut self, key: &str, op: &LabeledOperator) {
        self.push_hermiticity(key, op.hermiticity_residual(), HERMITICITY_TOL);
        let lambda = op
            .hermitian_part()
            .min_eigenvalue()
            .expect("Hermitian part is Hermitian");
        self.push_positivity(key, lambda, PSD_TOL);
    }

    /// Records a non-gating magnitude, e.g. the norm of a sector.
    pub fn push_diagnostic(&mut self, constraint: &str, key: &str, value: f64, passed: bool) {
        self.diagnostics.push(Check {
            constraint: constraint.into(),
            key: key.into(),
            residual: value,
            max_abs: value,
            min_eigenvalue: None,
            passed,
        });
    }
}
