//! Core sets, their calibration, and the closed-form support and conjugate
//! functions used by the SDP builders.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use gdrc_conic::NormOrder;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats::MomentProfile;

/// Norm-ball image `{ center + A z : ||z||_p <= sqrt(radius_sq) }` with an
/// attention weight on the distance to it.
#[derive(Debug, Clone)]
pub struct CoreSet {
    pub center: DVector<f64>,
    pub perturbation: DMatrix<f64>,
    pub radius_sq: f64,
    pub norm_order: NormOrder,
    pub attention: f64,
    inverse: DMatrix<f64>,
}

pub const MAX_CONDITION: f64 = 1e12;

impl CoreSet {
    pub fn new(
        center: DVector<f64>,
        perturbation: DMatrix<f64>,
        radius_sq: f64,
        norm_order: NormOrder,
        attention: f64,
    ) -> Result<Self> {
        let n = center.len();
        if perturbation.shape() != (n, n) {
            return Err(Error::Shape(format!("perturbation is {:?}, center has length {n}", perturbation.shape())));
        }
        if !(radius_sq >= 0.0) || !(attention >= 0.0) {
            return Err(Error::config("radius", "radius and attention must be nonnegative"));
        }
        let sv = perturbation.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0) || smax / smin > MAX_CONDITION {
            return Err(Error::Numerical(format!("core-set perturbation is singular (condition {:e})", smax / smin)));
        }
        let inverse = perturbation
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("core-set perturbation is singular".into()))?;
        Ok(CoreSet { center, perturbation, radius_sq, norm_order, attention, inverse })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `||A^{-1}(x - center)||_p^2`.
    pub fn membership_stat(&self, x: &DVector<f64>) -> f64 {
        let z = &self.inverse * (x - &self.center);
        self.norm_order.norm(z.as_slice()).powi(2)
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.membership_stat(x) <= self.radius_sq * (1.0 + 1e-12)
    }

    pub fn with_radius_sq(&self, radius_sq: f64) -> Self {
        CoreSet { radius_sq, ..self.clone() }
    }

    /// Dual order `q` with `1/p + 1/q = 1`.
    pub fn dual_order(&self) -> NormOrder {
        self.norm_order.dual()
    }
}

/// `sup { v'x : x in Y } = center'v + sqrt(radius_sq) ||A'v||_q`.
pub fn support_function(cs: &CoreSet, v: &DVector<f64>) -> f64 {
    let atv = cs.perturbation.transpose() * v;
    cs.center.dot(v) + cs.radius_sq.sqrt() * cs.dual_order().norm(atv.as_slice())
}

/// Whether `(r theta phi)**(v, -v)` is finite, i.e. `||v||_q <= r theta`.
pub fn biconjugate_bound(cs: &CoreSet, r_scale: f64, v: &DVector<f64>) -> bool {
    cs.dual_order().norm(v.as_slice()) <= r_scale * cs.attention
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AmbiguityConfig {
    /// Center interpolation toward the opposite class mean, in `[0, 0.5)`.
    pub lambda: f64,
    pub containment_fraction: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon: f64,
    pub core_sets_per_class: usize,
    pub theta: f64,
    pub p_norm: NormOrder,
    /// Multiplier on the calibrated squared radius; the class mean is kept
    /// inside regardless.
    #[serde(default = "unit")]
    pub radius_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        AmbiguityConfig {
            lambda: 0.0,
            containment_fraction: 0.1,
            gamma1: 0.1,
            gamma2: 1.2,
            epsilon: 0.05,
            core_sets_per_class: 1,
            theta: 400.0,
            p_norm: NormOrder::L2,
            radius_scale: 1.0,
        }
    }
}

impl AmbiguityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.lambda) {
            return Err(Error::config("lambda", format!("must lie in [0, 0.5), got {}", self.lambda)));
        }
        if !(self.containment_fraction > 0.0 && self.containment_fraction <= 1.0) {
            return Err(Error::config(
                "containment_fraction",
                format!("must lie in (0, 1], got {}", self.containment_fraction),
            ));
        }
        if !(self.gamma1 >= 0.0) {
            return Err(Error::config("gamma1", format!("must be >= 0, got {}", self.gamma1)));
        }
        if !(self.gamma2 >= 1.0) {
            return Err(Error::config("gamma2", format!("must be >= 1, got {}", self.gamma2)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.core_sets_per_class == 0 {
            return Err(Error::config("m_per_class", "must be positive"));
        }
        if !(self.radius_scale > 0.0 && self.radius_scale.is_finite()) {
            return Err(Error::config("radius_scale", format!("must be positive, got {}", self.radius_scale)));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::config("theta", format!("must be >= 0, got {}", self.theta)));
        }
        Ok(())
    }
}

/// Smallest squared radius such that at least `ceil(fraction * N)` of
/// `points` and the point `mean` lie in the core set centred at `center`.
pub fn calibrate_radius(
    center: &DVector<f64>,
    perturbation: &DMatrix<f64>,
    p: NormOrder,
    points: &[DVector<f64>],
    mean: &DVector<f64>,
    fraction: f64,
) -> Result<f64> {
    let probe = CoreSet::new(center.clone(), perturbation.clone(), 0.0, p, 0.0)?;
    let mut stats: Vec<f64> = points.iter().map(|x| probe.membership_stat(x)).collect();
    if stats.is_empty() {
        return Err(Error::InsufficientData("no points to calibrate a core set".into()));
    }
    stats.sort_by(f64::total_cmp);
    let k = ((fraction * stats.len() as f64 - 1e-9).ceil() as usize).clamp(1, stats.len());
    Ok(stats[k - 1].max(probe.membership_stat(mean)))
}

/// One set of core sets per class (index 0 for `+1`, 1 for `-1`).
///
/// Class `k`'s `j`-th centre is `(1 - l_j) mu_k + l_j mu_other` with
/// `l_j = lambda (j + 1) / m`, so the single-set case uses `lambda` itself.
/// The perturbation is the symmetric square root of the class covariance.
/// The calibrated radius is multiplied by `radius_scale`, then raised if
/// needed so the class mean stays inside.
pub fn build_core_sets(
    profiles: &[MomentProfile; 2],
    train: &Dataset,
    config: &AmbiguityConfig,
) -> Result<[Vec<CoreSet>; 2]> {
    config.validate()?;
    let m = config.core_sets_per_class;
    let mut out: [Vec<CoreSet>; 2] = [Vec::new(), Vec::new()];
    for k in 0..2 {
        let own = &profiles[k];
        let other = &profiles[1 - k];
        let a = own.sym_sqrt();
        let points = train.class_points(k);
        for j in 0..m {
            let l = config.lambda * (j + 1) as f64 / m as f64;
            let center = &own.mean * (1.0 - l) + &other.mean * l;
            let kth = calibrate_radius(&center, &a, config.p_norm, &points, &center, config.containment_fraction)?;
            let cs = CoreSet::new(center, a.clone(), 0.0, config.p_norm, config.theta)?;
            let radius_sq = (config.radius_scale * kth).max(cs.membership_stat(&own.mean));
            out[k].push(cs.with_radius_sq(radius_sq));
        }
    }
    Ok(out)
}

/// `n (N0 - 1) / (N0 (N0 - n)) * F^{-1}_{n, N0 - n}(quantile)`.
pub fn drc_mean_radius(n: usize, n0: usize, quantile: f64) -> Result<f64> {
    if n0 <= n {
        return Err(Error::config("n0", format!("reference sample size {n0} must exceed dimension {n}")));
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::config("quantile", format!("must lie in (0, 1), got {quantile}")));
    }
    let (nf, n0f) = (n as f64, n0 as f64);
    Ok(nf * (n0f - 1.0) / (n0f * (n0f - nf)) * f_quantile(nf, n0f - nf, quantile))
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

pub fn f_cdf(d1: f64, d2: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))
}

/// Inverse CDF of the F distribution by bisection.
pub fn f_quantile(d1: f64, d2: f64, q: f64) -> f64 {
    let mut hi = 1.0;
    while f_cdf(d1, d2, hi) < q {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(d1, d2, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_ball(n: usize, p: NormOrder) -> CoreSet {
        CoreSet::new(DVector::zeros(n), DMatrix::identity(n, n), 1.0, p, 1.0).unwrap()
    }

    #[test]
    fn support_of_unit_ball() {
        let cs = unit_ball(2, NormOrder::L2);
        assert_eq!(support_function(&cs, &DVector::zeros(2)), 0.0);
        assert!((support_function(&cs, &DVector::from_vec(vec![3.0, 4.0])) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn biconjugate_cases() {
        let mut cs = unit_ball(2, NormOrder::L1);
        cs.attention = 3.0;
        assert!(biconjugate_bound(&cs, 1.0, &DVector::from_vec(vec![2.0, -3.0])));
        assert!(!biconjugate_bound(&cs, 1.0, &DVector::from_vec(vec![2.0, -3.1])));
        cs.attention = 0.0;
        assert!(biconjugate_bound(&cs, 5.0, &DVector::zeros(2)));
        assert!(!biconjugate_bound(&cs, 1e9, &DVector::from_vec(vec![1e-9, 0.0])));
    }

    #[test]
    fn lambda_out_of_range() {
        let cfg = AmbiguityConfig { lambda: 0.5, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "lambda"));
    }

    #[test]
    fn drc_radius_limits() {
        assert!(drc_mean_radius(5, 5, 0.9).is_err());
        assert!(drc_mean_radius(3, 100, 1e-12).unwrap() < 1e-6);
    }

    #[test]
    fn singular_perturbation_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(CoreSet::new(DVector::zeros(2), a, 1.0, NormOrder::L2, 1.0), Err(Error::Numerical(_))));
    }
}
