//! Conic compilations of the SVM family and the trained classifiers they
//! produce.
//!
//! Every builder shifts the training data by its mean before assembly so the
//! second-moment terms stay well conditioned; `w` is unaffected and `b` is
//! mapped back exactly on extraction. Dual certificates are reported in the
//! shifted coordinates, with the shift recorded alongside.

mod baseline;
mod gdrc;

use std::time::Instant;

use gdrc_conic::{
    validate, ClarabelBackend, ConicBackend, ConicProgram, ConicSolution, ScalarVar, SolveOptions, SolveStatus,
    SymMatrixVar, ValidationReport, VectorVar,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use baseline::{build_drc, build_drc_mu, build_svm, kappa};
pub use gdrc::{build_gdrc, build_gdrc_app};

use crate::ambiguity::{build_core_sets, drc_mean_radius, AmbiguityConfig, CoreSet};
use crate::data::{Dataset, LABELS};
use crate::error::{Error, Result};
use crate::stats::{sample_moments, MomentProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    Drc,
    DrcMu,
    Gdrc,
    GdrcApp { rank: usize },
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Svm => write!(f, "SVM"),
            ModelKind::Drc => write!(f, "DRC-SVM"),
            ModelKind::DrcMu => write!(f, "DRC-mu-SVM"),
            ModelKind::Gdrc => write!(f, "GDRC-SVM"),
            ModelKind::GdrcApp { rank } => write!(f, "GDRC-SVM-app(r={rank})"),
        }
    }
}

impl ModelKind {
    pub fn is_gdrc(&self) -> bool {
        matches!(self, ModelKind::Gdrc | ModelKind::GdrcApp { .. })
    }
}

/// Leading and trailing square-root factors of each class covariance.
#[derive(Debug, Clone)]
pub struct PcaReduction {
    pub rank: usize,
    /// `S_k^{(r)}`, `n x r`.
    pub projector: [DMatrix<f64>; 2],
    /// `S_k^{(n-r)}`, `n x (n-r)`.
    pub trailing: [DMatrix<f64>; 2],
    /// Fraction of the eigenvalue mass in the leading `r` directions.
    pub explained: [f64; 2],
}

impl PcaReduction {
    pub fn new(profiles: &[MomentProfile; 2], rank: usize) -> Result<Self> {
        let (p0, t0) = profiles[0].split_factor(rank)?;
        let (p1, t1) = profiles[1].split_factor(rank)?;
        Ok(PcaReduction {
            rank,
            projector: [p0, p1],
            trailing: [t0, t1],
            explained: [profiles[0].explained_fraction(rank), profiles[1].explained_fraction(rank)],
        })
    }
}

pub(crate) struct ClassVars {
    lam: SymMatrixVar,
    q: VectorVar,
    t: ScalarVar,
    r: ScalarVar,
    tau: ScalarVar,
    v: Vec<VectorVar>,
    u: Vec<VectorVar>,
}

pub(crate) struct Vars {
    w: VectorVar,
    b: ScalarVar,
    xi: VectorVar,
    classes: Vec<ClassVars>,
}

/// `||(2w, t - 1)||_2 <= t + 1`, i.e. `||w||^2 <= t`.
fn add_objective_epigraph(p: &mut ConicProgram, w: &VectorVar) -> ScalarVar {
    let t = p.add_scalar("t_obj");
    let mut args: Vec<_> = w.exprs().into_iter().map(|e| e * 2.0).collect();
    args.push(t.expr() - 1.0);
    p.add_soc("objective epigraph", t.expr() + 1.0, args);
    t
}

/// A model compiled to a conic program, ready to solve.
pub struct CompiledModel {
    pub kind: ModelKind,
    pub program: ConicProgram,
    /// Data shift applied before assembly.
    pub shift: DVector<f64>,
    pub c: f64,
    pub epsilon: Option<f64>,
    vars: Vars,
    pub reduction: Option<PcaReduction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slacks {
    PerClass([f64; 2]),
    PerSample(Vec<f64>),
}

impl Slacks {
    pub fn values(&self) -> &[f64] {
        match self {
            Slacks::PerClass(v) => v,
            Slacks::PerSample(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCertificate {
    pub label: i8,
    /// Row-major `Lambda_k`.
    pub lambda: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub t: f64,
    pub r: f64,
    pub tau: f64,
    /// One entry per core set.
    pub v: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl ClassCertificate {
    pub fn lambda_matrix(&self) -> DMatrix<f64> {
        let n = self.lambda.len();
        DMatrix::from_fn(n, n, |i, j| self.lambda[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Shift subtracted from the data before the program was assembled.
    pub shift: Vec<f64>,
    pub classes: Vec<ClassCertificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub model_kind: ModelKind,
    pub w: Vec<f64>,
    pub b: f64,
    pub xi: Slacks,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl TrainedClassifier {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::Shape(format!("point has dimension {}, classifier expects {}", x.len(), self.n())));
        }
        Ok(self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b)
    }

    /// `+1` when `w'x + b > 0`, otherwise `-1` (points on the hyperplane go
    /// to `-1`).
    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        Ok(if self.decision(x)? > 0.0 { 1 } else { -1 })
    }

    pub fn predict_all(&self, ds: &Dataset) -> Result<Vec<i8>> {
        (0..ds.len()).map(|i| self.predict(ds.row(i).as_slice())).collect()
    }

    pub fn w_norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn flipped(&self) -> Self {
        TrainedClassifier { w: self.w.iter().map(|v| -v).collect(), b: -self.b, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classifier serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse { row: e.line(), col: e.column(), msg: e.to_string() })
    }
}

pub fn predict(classifier: &TrainedClassifier, x: &[f64]) -> Result<i8> {
    classifier.predict(x)
}

impl CompiledModel {
    /// Reads the classifier out of an optimal solution.
    pub fn extract(&self, sol: &ConicSolution) -> Result<TrainedClassifier> {
        if sol.status != SolveStatus::Optimal {
            return Err(Error::Solver(sol.status));
        }
        let x = &sol.x;
        let get = |v: &VectorVar| v.range().map(|i| x[i]).collect::<Vec<f64>>();
        let w = get(&self.vars.w);
        let b_shifted = x[self.vars.b.index];
        let b = b_shifted - w.iter().zip(self.shift.iter()).map(|(a, m)| a * m).sum::<f64>();
        let xi_vals = get(&self.vars.xi);
        let xi =
            if self.kind.is_gdrc() { Slacks::PerClass([xi_vals[0], xi_vals[1]]) } else { Slacks::PerSample(xi_vals) };
        let certificate = if self.vars.classes.is_empty() {
            None
        } else {
            let classes = self
                .vars
                .classes
                .iter()
                .enumerate()
                .map(|(k, cv)| {
                    let lam = gdrc_conic::expr::smat(&x[cv.lam.range()], cv.lam.n);
                    ClassCertificate {
                        label: LABELS[k],
                        lambda: lam.row_iter().map(|r| r.iter().copied().collect()).collect(),
                        q: get(&cv.q),
                        t: x[cv.t.index],
                        r: x[cv.r.index],
                        tau: x[cv.tau.index],
                        v: cv.v.iter().map(get).collect(),
                        u: cv.u.iter().map(get).collect(),
                    }
                })
                .collect();
            Some(Certificate { shift: self.shift.iter().copied().collect(), classes })
        };
        Ok(TrainedClassifier {
            model_kind: self.kind,
            w,
            b,
            xi,
            c: self.c,
            epsilon: self.epsilon,
            objective: sol.objective,
            certificate,
            config: None,
        })
    }

    pub fn solve_with(self, backend: &dyn ConicBackend, opts: &SolveOptions) -> Result<Fitted> {
        let start = Instant::now();
        let solution = backend.solve(&self.program, opts)?;
        let seconds = start.elapsed().as_secs_f64();
        let validation = validate(&self.program, &solution, CERTIFICATE_TOL);
        let classifier = self.extract(&solution)?;
        Ok(Fitted { classifier, model: self, solution, validation, seconds })
    }

    pub fn solve(self, opts: &SolveOptions) -> Result<Fitted> {
        self.solve_with(&ClarabelBackend, opts)
    }
}

/// Absolute margin used when validating returned points.
pub const CERTIFICATE_TOL: f64 = 1e-6;

pub struct Fitted {
    pub classifier: TrainedClassifier,
    pub model: CompiledModel,
    pub solution: ConicSolution,
    pub validation: ValidationReport,
    /// Solver wall-clock.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c: f64,
    pub ambiguity: AmbiguityConfig,
    pub drc_cov_scale: f64,
    pub drc_n0: usize,
    pub drc_quantile: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            c: 16.0,
            ambiguity: AmbiguityConfig::default(),
            drc_cov_scale: 0.01,
            drc_n0: 100,
            drc_quantile: 0.9,
        }
    }
}

/// Class profiles and core sets estimated from one training set.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Profiles behind the GDRC models and their core sets.
    pub profiles: [MomentProfile; 2],
    pub core_sets: [Vec<CoreSet>; 2],
    /// Profiles with the plain relative floor, used by DRC and DRC-mu.
    pub baseline_profiles: [MomentProfile; 2],
}

pub fn prepare(train: &Dataset, params: &ModelParams) -> Result<Prepared> {
    train.require_both_classes()?;
    params.ambiguity.validate()?;
    let a = &params.ambiguity;
    let moments = [sample_moments(&train.class_points(0), 0.0)?, sample_moments(&train.class_points(1), 0.0)?];
    let min_floor = pooled_floor(train);
    let profile =
        |k: usize, floor| MomentProfile::from_moments_with_min_floor(moments[k].clone(), a.gamma1, a.gamma2, floor);
    let profiles = [profile(0, min_floor)?, profile(1, min_floor)?];
    let baseline_profiles = [profile(0, 1e-12)?, profile(1, 1e-12)?];
    let core_sets = build_core_sets(&profiles, train, a)?;
    Ok(Prepared { profiles, core_sets, baseline_profiles })
}

/// Lower bound on the GDRC per-class diagonal floor: a small fraction of the
/// pooled per-coordinate scatter, so a class with no spread still yields
/// semidefinite blocks the solver can work with.
fn pooled_floor(train: &Dataset) -> f64 {
    const POOLED_FLOOR: f64 = 1e-6;
    let mean = train.features.row_mean();
    let scatter: f64 = train.features.row_iter().map(|r| (r - &mean).norm_squared()).sum::<f64>();
    let per_coord = scatter / (train.len().max(2) - 1) as f64 / train.n() as f64;
    (POOLED_FLOOR * per_coord).max(1e-12)
}

pub fn compile(kind: ModelKind, train: &Dataset, prepared: &Prepared, params: &ModelParams) -> Result<CompiledModel> {
    let eps = params.ambiguity.epsilon;
    match kind {
        ModelKind::Svm => build_svm(train, params.c),
        ModelKind::Drc => build_drc(train, &prepared.baseline_profiles, params.c, eps, params.drc_cov_scale),
        ModelKind::DrcMu => {
            let nu_sq = drc_mean_radius(train.n(), params.drc_n0, params.drc_quantile)?;
            build_drc_mu(train, &prepared.baseline_profiles, params.c, eps, params.drc_cov_scale, nu_sq)
        }
        ModelKind::Gdrc => build_gdrc(&prepared.profiles, &prepared.core_sets, params.c, eps),
        ModelKind::GdrcApp { rank } => build_gdrc_app(&prepared.profiles, &prepared.core_sets, params.c, eps, rank),
    }
}

/// Estimates, compiles and solves in one go with the default backend.
pub fn fit(kind: ModelKind, train: &Dataset, params: &ModelParams, opts: &SolveOptions) -> Result<Fitted> {
    if kind == ModelKind::Svm {
        return build_svm(train, params.c)?.solve(opts);
    }
    let prepared = prepare(train, params)?;
    compile(kind, train, &prepared, params)?.solve(opts)
}

/// Upper bound `(C/2) sum_{k,j} (||g_kj|| + ||h_kj||)` on `v*(n) - v*(r)`
/// for a solution of the rank-`r` approximation, with
/// `g = S^{(n-r)'}(y w + v)` and `h = S^{(n-r)'} u`.
///
/// The lifting behind this bound leaves the moment constraint's trace term
/// unaccounted for, so it can be exceeded at low rank; see
/// [`conservative_gap_bound`].
pub fn gap_bound(classifier: &TrainedClassifier, profiles: &[MomentProfile; 2], c: f64) -> Result<f64> {
    Ok(c * trailing_mass(classifier, profiles)?.iter().sum::<f64>())
}

/// Sound version of [`gap_bound`]: lifting the rank-`r` solution also raises
/// `t_k` by `s_k` and `tau_k` by `(1 + gamma2) s_k / eps`, which costs
/// `C (1 + gamma2) s_k / eps` per class.
pub fn conservative_gap_bound(classifier: &TrainedClassifier, profiles: &[MomentProfile; 2], c: f64) -> Result<f64> {
    let eps = classifier.epsilon.ok_or(Error::CertificateRequired)?;
    let s = trailing_mass(classifier, profiles)?;
    Ok((0..2).map(|k| c * (1.0 + profiles[k].gamma2) * s[k] / eps).sum())
}

/// `s_k = (1/2) sum_j (||g_kj|| + ||h_kj||)` per class.
fn trailing_mass(classifier: &TrainedClassifier, profiles: &[MomentProfile; 2]) -> Result<[f64; 2]> {
    let cert = classifier.certificate.as_ref().ok_or(Error::CertificateRequired)?;
    let n = classifier.n();
    let rank = match classifier.model_kind {
        ModelKind::GdrcApp { rank } => rank,
        ModelKind::Gdrc => n,
        _ => return Err(Error::CertificateRequired),
    };
    let w = DVector::from_column_slice(&classifier.w);
    let mut out = [0.0; 2];
    for (k, cc) in cert.classes.iter().enumerate() {
        let (_, trailing) = profiles[k].split_factor(rank)?;
        if trailing.ncols() == 0 {
            continue;
        }
        let tt = trailing.transpose();
        let y = LABELS[k] as f64;
        for (v, u) in cc.v.iter().zip(&cc.u) {
            let g = &tt * (&w * y + DVector::from_column_slice(v));
            let h = &tt * DVector::from_column_slice(u);
            out[k] += 0.5 * (g.norm() + h.norm());
        }
    }
    Ok(out)
}
