use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ConicError, Result};
use crate::expr::smat;
use crate::program::{BlockKind, ConicProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

/// Residuals as reported by the backend (relative primal/dual
/// infeasibility and duality gap).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal_feas: f64,
    pub dual_feas: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Values of the program variables (auxiliaries stripped).
    pub x: Vec<f64>,
    /// Objective re-evaluated at `x`.
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: u32,
    pub backend: String,
}

/// Value of a named block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue {
    Scalar(f64),
    Vector(Vec<f64>),
    SymMatrix(DMatrix<f64>),
}

impl ConicSolution {
    pub fn block(&self, program: &ConicProgram, name: &str) -> Result<BlockValue> {
        let b = program.block(name).ok_or_else(|| ConicError::UnknownBlock(name.to_string()))?;
        let slice = &self.x[b.start..b.start + b.kind.width()];
        Ok(match b.kind {
            BlockKind::Scalar => BlockValue::Scalar(slice[0]),
            BlockKind::Vector(_) => BlockValue::Vector(slice.to_vec()),
            BlockKind::SymMatrix(n) => BlockValue::SymMatrix(smat(slice, n)),
        })
    }

    pub fn scalar(&self, program: &ConicProgram, name: &str) -> Result<f64> {
        match self.block(program, name)? {
            BlockValue::Scalar(v) => Ok(v),
            _ => Err(ConicError::Shape(format!("block `{name}` is not a scalar"))),
        }
    }

    pub fn vector(&self, program: &ConicProgram, name: &str) -> Result<Vec<f64>> {
        match self.block(program, name)? {
            BlockValue::Vector(v) => Ok(v),
            BlockValue::Scalar(v) => Ok(vec![v]),
            _ => Err(ConicError::Shape(format!("block `{name}` is not a vector"))),
        }
    }

    pub fn matrix(&self, program: &ConicProgram, name: &str) -> Result<DMatrix<f64>> {
        match self.block(program, name)? {
            BlockValue::SymMatrix(m) => Ok(m),
            _ => Err(ConicError::Shape(format!("block `{name}` is not a matrix"))),
        }
    }
}
