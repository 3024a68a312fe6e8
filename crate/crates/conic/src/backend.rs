use std::time::Duration;

use crate::error::Result;
use crate::program::ConicProgram;
use crate::solution::{ConicSolution, Residuals, SolveStatus};
use crate::standard::StandardForm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Feasibility and gap tolerance.
    pub tolerance: f64,
    pub max_iter: u32,
    pub time_limit: Option<Duration>,
    /// Let the backend print its iteration log.
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iter: 200, time_limit: None, verbose: false }
    }
}

impl SolveOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self { tolerance, ..Self::default() }
    }
}

/// Raw backend output on the standard form.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: SolveStatus,
    /// Full-length primal vector (including auxiliaries).
    pub x: Vec<f64>,
    pub residuals: Residuals,
    pub iterations: u32,
}

/// Any conic solver over the zero / nonnegative / second-order / PSD cones.
pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve_standard(&self, sf: &StandardForm, opts: &SolveOptions) -> Result<RawSolution>;

    fn solve(&self, program: &ConicProgram, opts: &SolveOptions) -> Result<ConicSolution> {
        let sf = StandardForm::from_program(program);
        let raw = self.solve_standard(&sf, opts)?;
        let mut x = raw.x;
        x.truncate(program.num_vars);
        let objective = program.objective.eval(&x);
        log::debug!(
            "{}: status {:?} after {} iterations, objective {objective:.6e}",
            self.name(),
            raw.status,
            raw.iterations
        );
        Ok(ConicSolution {
            status: raw.status,
            x,
            objective,
            residuals: raw.residuals,
            iterations: raw.iterations,
            backend: self.name().to_string(),
        })
    }
}

/// Solves with the default backend ([`crate::ClarabelBackend`]).
pub fn solve(program: &ConicProgram, opts: &SolveOptions) -> Result<ConicSolution> {
    crate::ClarabelBackend.solve(program, opts)
}
