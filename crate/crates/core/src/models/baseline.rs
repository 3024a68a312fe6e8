use gdrc_conic::expr::{mat_vec, vec_scale};
use gdrc_conic::{ConicProgram, LinExpr};
use nalgebra::DVector;

use super::{add_objective_epigraph, CompiledModel, ModelKind, Vars};
use crate::data::{Dataset, LABELS};
use crate::error::{Error, Result};
use crate::stats::MomentProfile;

fn check_common(train: &Dataset, c: f64) -> Result<()> {
    train.require_both_classes()?;
    if !(c > 0.0) {
        return Err(Error::config("c", format!("must be positive, got {c}")));
    }
    Ok(())
}

fn data_mean(train: &Dataset) -> DVector<f64> {
    train.features.row_mean().transpose()
}

/// Soft-margin SVM with per-sample slacks.
pub fn build_svm(train: &Dataset, c: f64) -> Result<CompiledModel> {
    check_common(train, c)?;
    per_sample_model(train, c, None, ModelKind::Svm, None)
}

/// Chebyshev-robust SVM: every sample's margin is tightened by
/// `kappa(eps) ||(cov_scale Sigma_k)^{1/2} w||` with
/// `kappa = sqrt((1 - eps) / eps)`.
pub fn build_drc(
    train: &Dataset,
    profiles: &[MomentProfile; 2],
    c: f64,
    epsilon: f64,
    cov_scale: f64,
) -> Result<CompiledModel> {
    drc_inner(train, profiles, c, epsilon, cov_scale, 0.0, ModelKind::Drc)
}

/// As [`build_drc`] with the margin further tightened by
/// `nu ||(cov_scale Sigma_k)^{1/2} w||`, `nu = sqrt(nu_sq)`.
pub fn build_drc_mu(
    train: &Dataset,
    profiles: &[MomentProfile; 2],
    c: f64,
    epsilon: f64,
    cov_scale: f64,
    nu_sq: f64,
) -> Result<CompiledModel> {
    if !(nu_sq >= 0.0) {
        return Err(Error::config("nu_sq", format!("must be >= 0, got {nu_sq}")));
    }
    drc_inner(train, profiles, c, epsilon, cov_scale, nu_sq.sqrt(), ModelKind::DrcMu)
}

pub fn kappa(epsilon: f64) -> f64 {
    ((1.0 - epsilon) / epsilon).sqrt()
}

fn drc_inner(
    train: &Dataset,
    profiles: &[MomentProfile; 2],
    c: f64,
    epsilon: f64,
    cov_scale: f64,
    nu: f64,
    kind: ModelKind,
) -> Result<CompiledModel> {
    check_common(train, c)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    if !(cov_scale >= 0.0) {
        return Err(Error::config("cov_scale", format!("must be >= 0, got {cov_scale}")));
    }
    let scale = (kappa(epsilon) + nu) * cov_scale.sqrt();
    per_sample_model(train, c, Some((profiles, scale)), kind, Some(epsilon))
}

fn per_sample_model(
    train: &Dataset,
    c: f64,
    robust: Option<(&[MomentProfile; 2], f64)>,
    kind: ModelKind,
    epsilon: Option<f64>,
) -> Result<CompiledModel> {
    let n = train.n();
    let shift = data_mean(train);
    let mut p = ConicProgram::new();
    let w = p.add_vector("w", n);
    let b = p.add_scalar("b");
    let xi = p.add_vector("xi", train.len());
    let t_obj = add_objective_epigraph(&mut p, &w);

    // ||S_k' w|| terms are shared by every sample of a class
    let penalties: Option<Vec<Vec<LinExpr>>> = robust.map(|(profiles, scale)| {
        profiles.iter().map(|prof| vec_scale(&mat_vec(&prof.sqrt_factor.transpose(), &w.exprs()), scale)).collect()
    });
    for i in 0..train.len() {
        let y = train.labels[i] as f64;
        let x = train.row(i) - &shift;
        let margin = (w.dot(x.as_slice()) + b.expr()) * y - 1.0 + xi.at(i);
        match &penalties {
            None => p.add_ge(&format!("margin[{i}]"), margin),
            Some(pen) => {
                let k = if train.labels[i] == LABELS[0] { 0 } else { 1 };
                p.add_soc(&format!("robust margin[{i}]"), margin, pen[k].clone())
            }
        };
        p.add_ge(&format!("xi[{i}] >= 0"), xi.at(i));
    }
    let mut slack_sum = LinExpr::zero();
    for i in 0..train.len() {
        slack_sum += xi.at(i);
    }
    p.minimize(t_obj.expr() * 0.5 + slack_sum * c);
    Ok(CompiledModel {
        kind,
        program: p,
        shift,
        c,
        epsilon,
        vars: Vars { w, b, xi, classes: Vec::new() },
        reduction: None,
    })
}
