use gdrc_conic::expr::{mat_vec, vec_add, vec_scale};
use gdrc_conic::{ConicProgram, LinExpr, MatrixExpr};
use nalgebra::{DMatrix, DVector};

use super::{add_objective_epigraph, ClassVars, CompiledModel, ModelKind, PcaReduction, Vars};
use crate::ambiguity::CoreSet;
use crate::data::LABELS;
use crate::error::{Error, Result};
use crate::stats::MomentProfile;

const MEMBERSHIP_SLACK: f64 = 1e-9;

pub(super) fn class_tag(k: usize) -> &'static str {
    if k == 0 {
        "+1"
    } else {
        "-1"
    }
}

fn check_inputs(profiles: &[MomentProfile; 2], core_sets: &[Vec<CoreSet>; 2], c: f64, epsilon: f64) -> Result<usize> {
    if !(c > 0.0) {
        return Err(Error::config("c", format!("must be positive, got {c}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    let n = profiles[0].dim();
    if profiles[1].dim() != n {
        return Err(Error::Shape("class profiles differ in dimension".into()));
    }
    for k in 0..2 {
        if core_sets[k].is_empty() {
            return Err(Error::config("m_per_class", format!("class {} has no core set", class_tag(k))));
        }
        for (j, cs) in core_sets[k].iter().enumerate() {
            if cs.dim() != n {
                return Err(Error::Shape(format!("core set {j} of class {} has dimension {}", class_tag(k), cs.dim())));
            }
            let stat = cs.membership_stat(&profiles[k].mean);
            if stat > cs.radius_sq * (1.0 + MEMBERSHIP_SLACK) + MEMBERSHIP_SLACK {
                return Err(Error::AssumptionViolated(format!(
                    "mean of class {} lies outside core set {j} (statistic {stat:.6e} > radius {:.6e})",
                    class_tag(k),
                    cs.radius_sq
                )));
            }
        }
    }
    Ok(n)
}

/// Sample-weighted average of the class means, i.e. the training mean.
fn pooled_mean(profiles: &[MomentProfile; 2]) -> DVector<f64> {
    let (n1, n2) = (profiles[0].sample_count as f64, profiles[1].sample_count as f64);
    (&profiles[0].mean * n1 + &profiles[1].mean * n2) / (n1 + n2)
}

struct CoreVars {
    off_v: Vec<LinExpr>,
    off_u: Vec<LinExpr>,
    v: gdrc_conic::VectorVar,
    u: gdrc_conic::VectorVar,
    sigma_v: LinExpr,
    sigma_u: LinExpr,
}

/// Adds `v`, `u`, the `||A'v||_q <= sigma` epigraphs and the attention caps
/// for one core set. Returns the handles needed for the LMIs.
fn add_core_set_vars(p: &mut ConicProgram, cs: &CoreSet, r: &LinExpr, tag: &str, j: usize) -> CoreVars {
    let n = cs.dim();
    let q = cs.dual_order();
    let at = cs.perturbation.transpose();
    let v = p.add_vector(&format!("v[{tag},{j}]"), n);
    let u = p.add_vector(&format!("u[{tag},{j}]"), n);
    let sv = p.add_scalar(&format!("sigma_v[{tag},{j}]"));
    let su = p.add_scalar(&format!("sigma_u[{tag},{j}]"));
    p.add_norm_cap(&format!("class {tag} set {j}: ||A'v||_q <= sigma_v"), q, mat_vec(&at, &v.exprs()), sv.expr());
    p.add_norm_cap(&format!("class {tag} set {j}: ||A'u||_q <= sigma_u"), q, mat_vec(&at, &u.exprs()), su.expr());
    p.add_norm_cap(&format!("class {tag} set {j}: ||v||_q <= r theta"), q, v.exprs(), r.scaled(cs.attention));
    p.add_norm_cap(&format!("class {tag} set {j}: ||u||_q <= r theta"), q, u.exprs(), r.scaled(cs.attention));
    CoreVars { off_v: Vec::new(), off_u: Vec::new(), v, u, sigma_v: sv.expr(), sigma_u: su.expr() }
}

/// Full GDRC model: per class a moment bound, and per core set a pair of
/// bordered `(n+1) x (n+1)` LMIs with dual-norm attention caps.
///
/// Data are shifted by the pooled training mean before assembly; `b` is
/// mapped back on extraction.
pub fn build_gdrc(
    profiles: &[MomentProfile; 2],
    core_sets: &[Vec<CoreSet>; 2],
    c: f64,
    epsilon: f64,
) -> Result<CompiledModel> {
    let n = check_inputs(profiles, core_sets, c, epsilon)?;
    let shift = pooled_mean(profiles);
    let mut p = ConicProgram::new();
    let w = p.add_vector("w", n);
    let b = p.add_scalar("b");
    let xi = p.add_vector("xi", 2);
    let t_obj = add_objective_epigraph(&mut p, &w);
    let mut classes = Vec::new();

    for k in 0..2 {
        let tag = class_tag(k);
        let y = LABELS[k] as f64;
        let prof = &profiles[k];
        let mu = &prof.mean - &shift;
        let lam = p.add_sym_matrix(&format!("Lambda[{tag}]"), n);
        let q = p.add_vector(&format!("q[{tag}]"), n);
        let t = p.add_scalar(&format!("t[{tag}]"));
        let r = p.add_nonneg_scalar(&format!("r[{tag}]"));
        let tau = p.add_nonneg_scalar(&format!("tau[{tag}]"));
        p.add_ge(&format!("xi[{tag}] >= 0"), xi.at(k));

        // t + Lambda.(g2 Sigma + mu mu') + sqrt(g1) ||Sigma^{1/2}(q + 2 Lambda mu)|| + q'mu + r <= eps tau
        let second = &prof.covariance * prof.gamma2 + &mu * mu.transpose();
        let inner = vec_add(&q.exprs(), &vec_scale(&lam.mul_vec(mu.as_slice()), 2.0));
        let args = vec_scale(&mat_vec(&prof.sqrt_factor.transpose(), &inner), prof.gamma1.sqrt());
        let bound = tau.expr() * epsilon - t.expr() - lam.inner(&second) - q.dot(mu.as_slice()) - r.expr();
        p.add_soc(&format!("class {tag}: moment bound"), bound, args);

        let mut vs = Vec::new();
        let mut us = Vec::new();
        for (j, cs) in core_sets[k].iter().enumerate() {
            let center = &cs.center - &shift;
            let mut cv = add_core_set_vars(&mut p, cs, &r.expr(), tag, j);
            let root = cs.radius_sq.sqrt();
            cv.off_v = (0..n).map(|i| (cv.v.at(i) + q.at(i) + w.at(i) * y) * 0.5).collect();
            cv.off_u = (0..n).map(|i| (cv.u.at(i) + q.at(i)) * 0.5).collect();
            let corner_v = t.expr() - tau.expr() + b.expr() * y - 1.0 + xi.at(k)
                - cv.v.dot(center.as_slice())
                - cv.sigma_v.scaled(root);
            let corner_u = t.expr() - cv.u.dot(center.as_slice()) - cv.sigma_u.scaled(root);
            p.add_psd_block(
                &format!("class {tag} set {j}: violation LMI"),
                &MatrixExpr::bordered(&lam, &cv.off_v, corner_v),
            )?;
            p.add_psd_block(
                &format!("class {tag} set {j}: nonnegativity LMI"),
                &MatrixExpr::bordered(&lam, &cv.off_u, corner_u),
            )?;
            vs.push(cv.v);
            us.push(cv.u);
        }
        classes.push(ClassVars { lam, q, t, r, tau, v: vs, u: us });
    }
    p.minimize(t_obj.expr() * 0.5 + (xi.at(0) + xi.at(1)) * c);
    Ok(CompiledModel {
        kind: ModelKind::Gdrc,
        program: p,
        shift,
        c,
        epsilon: Some(epsilon),
        vars: Vars { w, b, xi, classes },
        reduction: None,
    })
}

/// PCA approximation: `Lambda` is `r x r`, `q` lives in `R^r`, and the
/// LMIs are `(r+1) x (r+1)` with the data entering through the leading
/// square-root factor `S^{(r)}`.
pub fn build_gdrc_app(
    profiles: &[MomentProfile; 2],
    core_sets: &[Vec<CoreSet>; 2],
    c: f64,
    epsilon: f64,
    rank: usize,
) -> Result<CompiledModel> {
    let n = check_inputs(profiles, core_sets, c, epsilon)?;
    let reduction = PcaReduction::new(profiles, rank)?;
    let shift = pooled_mean(profiles);
    let mut p = ConicProgram::new();
    let w = p.add_vector("w", n);
    let b = p.add_scalar("b");
    let xi = p.add_vector("xi", 2);
    let t_obj = add_objective_epigraph(&mut p, &w);
    let mut classes = Vec::new();

    for k in 0..2 {
        let tag = class_tag(k);
        let y = LABELS[k] as f64;
        let prof = &profiles[k];
        let mu = &prof.mean - &shift;
        let s_lead_t: DMatrix<f64> = reduction.projector[k].transpose();
        let lam = p.add_sym_matrix(&format!("Lambda[{tag}]"), rank);
        let q = p.add_vector(&format!("q[{tag}]"), rank);
        let t = p.add_scalar(&format!("t[{tag}]"));
        let r = p.add_nonneg_scalar(&format!("r[{tag}]"));
        let tau = p.add_nonneg_scalar(&format!("tau[{tag}]"));
        p.add_ge(&format!("xi[{tag}] >= 0"), xi.at(k));

        // t + g2 tr(Lambda) + sqrt(g1) ||q|| + r <= eps tau
        let bound = tau.expr() * epsilon - t.expr() - lam.trace().scaled(prof.gamma2) - r.expr();
        p.add_soc(&format!("class {tag}: moment bound"), bound, vec_scale(&q.exprs(), prof.gamma1.sqrt()));

        let mut vs = Vec::new();
        let mut us = Vec::new();
        for (j, cs) in core_sets[k].iter().enumerate() {
            let offset = &cs.center - &prof.mean;
            let mut cv = add_core_set_vars(&mut p, cs, &r.expr(), tag, j);
            let root = cs.radius_sq.sqrt();
            let ywv: Vec<LinExpr> = (0..n).map(|i| w.at(i) * y + cv.v.at(i)).collect();
            cv.off_v = vec_scale(&vec_add(&q.exprs(), &mat_vec(&s_lead_t, &ywv)), 0.5);
            cv.off_u = vec_scale(&vec_add(&q.exprs(), &mat_vec(&s_lead_t, &cv.u.exprs())), 0.5);
            let corner_v = t.expr() - tau.expr() + (w.dot(mu.as_slice()) + b.expr()) * y - 1.0 + xi.at(k)
                - cv.v.dot(offset.as_slice())
                - cv.sigma_v.scaled(root);
            let corner_u = t.expr() - cv.u.dot(offset.as_slice()) - cv.sigma_u.scaled(root);
            p.add_psd_block(
                &format!("class {tag} set {j}: violation LMI"),
                &MatrixExpr::bordered(&lam, &cv.off_v, corner_v),
            )?;
            p.add_psd_block(
                &format!("class {tag} set {j}: nonnegativity LMI"),
                &MatrixExpr::bordered(&lam, &cv.off_u, corner_u),
            )?;
            vs.push(cv.v);
            us.push(cv.u);
        }
        classes.push(ClassVars { lam, q, t, r, tau, v: vs, u: us });
    }
    p.minimize(t_obj.expr() * 0.5 + (xi.at(0) + xi.at(1)) * c);
    Ok(CompiledModel {
        kind: ModelKind::GdrcApp { rank },
        program: p,
        shift,
        c,
        epsilon: Some(epsilon),
        vars: Vars { w, b, xi, classes },
        reduction: Some(reduction),
    })
}
