// Links the system OpenBLAS/LAPACK used by the PSD cone kernels.
extern crate openblas_src;

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::backend::{ConicBackend, RawSolution, SolveOptions};
use crate::error::{ConicError, Result};
use crate::solution::{Residuals, SolveStatus};
use crate::standard::{Cone, StandardForm};

/// Interior-point backend built on the Clarabel homogeneous-embedding solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend;

fn to_csc(sf: &StandardForm) -> CscMatrix<f64> {
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(r, c, v) in &sf.a {
        *merged.entry((c, r)).or_insert(0.0) += v;
    }
    let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
    for ((c, r), v) in merged {
        if v != 0.0 {
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
    }
    CscMatrix::new_from_triplets(sf.num_rows(), sf.num_vars, rows, cols, vals)
}

fn map_status(s: SolverStatus) -> SolveStatus {
    match s {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalTrouble,
    }
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve_standard(&self, sf: &StandardForm, opts: &SolveOptions) -> Result<RawSolution> {
        let p = CscMatrix::zeros((sf.num_vars, sf.num_vars));
        let a = to_csc(sf);
        let cones: Vec<SupportedConeT<f64>> = sf
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(d) => SupportedConeT::ZeroConeT(d),
                Cone::Nonneg(d) => SupportedConeT::NonnegativeConeT(d),
                Cone::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
                Cone::Psd(n) => SupportedConeT::PSDTriangleConeT(n),
            })
            .collect();
        // A stalled solve is retried with stronger static regularization of
        // the KKT system; the termination tolerances never change.
        let mut last = None;
        for reg in STATIC_REGULARIZATION {
            let raw = solve_once(&p, &a, &cones, sf, opts, reg)?;
            let done = raw.status != SolveStatus::NumericalTrouble;
            last = Some(raw);
            if done {
                break;
            }
            log::debug!("clarabel stalled with static regularization {reg:e}; retrying");
        }
        Ok(last.expect("at least one attempt"))
    }
}

const STATIC_REGULARIZATION: [f64; 3] = [1e-8, 1e-7, 1e-6];

fn solve_once(
    p: &CscMatrix<f64>,
    a: &CscMatrix<f64>,
    cones: &[SupportedConeT<f64>],
    sf: &StandardForm,
    opts: &SolveOptions,
    static_reg: f64,
) -> Result<RawSolution> {
    let tol = opts.tolerance;
    let settings = DefaultSettingsBuilder::default()
        .verbose(opts.verbose)
        .direct_solve_method("faer".to_string())
        .static_regularization_constant(static_reg)
        .max_iter(opts.max_iter)
        .time_limit(opts.time_limit.map_or(f64::INFINITY, |d| d.as_secs_f64()))
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .build()
        .map_err(|e| ConicError::Backend(format!("settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(p, &sf.c, a, &sf.b, cones, settings)
        .map_err(|e| ConicError::Backend(format!("setup: {e:?}")))?;
    solver.solve();
    let info = &solver.info;
    Ok(RawSolution {
        status: map_status(solver.solution.status),
        x: solver.solution.x.clone(),
        residuals: Residuals {
            primal_feas: info.res_primal,
            dual_feas: info.res_dual,
            gap: info.gap_rel.min(info.gap_abs),
        },
        iterations: solver.solution.iterations,
    })
}
