//! Solver-independent feasibility check of a primal point.
//!
//! Every constraint is re-evaluated from the program data and the primal
//! values; backend residuals are never consulted.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::program::{ConicProgram, ConstraintKind, NormOrder};
use crate::solution::ConicSolution;

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintCheck {
    pub label: String,
    pub class: &'static str,
    /// Signed feasibility margin; negative means violated. Equalities report
    /// `-|residual|`, PSD blocks their minimum eigenvalue.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassSummary {
    pub class: &'static str,
    pub count: usize,
    pub worst_margin: f64,
    pub worst_label: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub passed: bool,
    pub per_class: Vec<ClassSummary>,
    pub checks: Vec<ConstraintCheck>,
}

impl ValidationReport {
    pub fn worst(&self, class: &str) -> Option<&ClassSummary> {
        self.per_class.iter().find(|c| c.class == class)
    }

    /// Worst margin over all constraints (`+inf` for an empty program).
    pub fn worst_margin(&self) -> f64 {
        self.checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConstraintCheck> {
        let tol = self.tolerance;
        self.checks.iter().filter(move |c| c.margin < -tol)
    }
}

fn min_eigenvalue(dim: usize, entries: &[f64]) -> f64 {
    let mut m = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for j in 0..dim {
        for i in 0..=j {
            m[(i, j)] = entries[k];
            m[(j, i)] = entries[k];
            k += 1;
        }
    }
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn margin(kind: &ConstraintKind, x: &[f64]) -> f64 {
    match kind {
        ConstraintKind::Equality { expr } => -expr.eval(x).abs(),
        ConstraintKind::Inequality { expr } => expr.eval(x),
        ConstraintKind::SecondOrder { bound, args } => {
            let v: Vec<f64> = args.iter().map(|a| a.eval(x)).collect();
            bound.eval(x) - NormOrder::L2.norm(&v)
        }
        ConstraintKind::NormCap { order, bound, args } => {
            let v: Vec<f64> = args.iter().map(|a| a.eval(x)).collect();
            bound.eval(x) - order.norm(&v)
        }
        ConstraintKind::Psd { dim, upper } => {
            let vals: Vec<f64> = upper.iter().map(|e| e.eval(x)).collect();
            min_eigenvalue(*dim, &vals)
        }
    }
}

/// Checks the point `x` against every constraint of `program`.
pub fn validate_point(program: &ConicProgram, x: &[f64], tol: f64) -> ValidationReport {
    assert_eq!(x.len(), program.num_vars, "point has wrong length");
    let checks: Vec<ConstraintCheck> = program
        .constraints
        .iter()
        .map(|c| ConstraintCheck { label: c.label.clone(), class: c.kind.class_name(), margin: margin(&c.kind, x) })
        .collect();
    let mut per_class: Vec<ClassSummary> = Vec::new();
    for c in &checks {
        match per_class.iter_mut().find(|s| s.class == c.class) {
            Some(s) => {
                s.count += 1;
                if c.margin < s.worst_margin {
                    s.worst_margin = c.margin;
                    s.worst_label = c.label.clone();
                }
            }
            None => per_class.push(ClassSummary {
                class: c.class,
                count: 1,
                worst_margin: c.margin,
                worst_label: c.label.clone(),
            }),
        }
    }
    let passed = checks.iter().all(|c| c.margin >= -tol);
    ValidationReport { tolerance: tol, passed, per_class, checks }
}

pub fn validate(program: &ConicProgram, solution: &ConicSolution, tol: f64) -> ValidationReport {
    validate_point(program, &solution.x, tol)
}
