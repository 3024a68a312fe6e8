//! Small dense primal-dual interior-point solver.
//!
//! Infeasible-start path following with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector, solving the full KKT system by dense LU at
//! every iteration. It only targets small programs (total PSD order up to
//! [`DenseReferenceBackend::DEFAULT_MAX_PSD_DIM`]) and serves as an
//! independent cross-check of the production backend. It does not detect
//! infeasibility: such programs end in `NumericalTrouble`.
//!
//! Problem form, after splitting the zero cone off as equalities:
//!
//! ```text
//! min c'x   s.t.  A x = b,  G x + s = h,  s in K
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::backend::{ConicBackend, RawSolution, SolveOptions};
use crate::error::{ConicError, Result};
use crate::expr::{smat, svec, svec_len};
use crate::solution::{Residuals, SolveStatus};
use crate::standard::{Cone, StandardForm};

#[derive(Debug, Clone, Copy)]
pub struct DenseReferenceBackend {
    pub max_psd_dim: usize,
}

impl DenseReferenceBackend {
    pub const DEFAULT_MAX_PSD_DIM: usize = 30;
}

impl Default for DenseReferenceBackend {
    fn default() -> Self {
        Self { max_psd_dim: Self::DEFAULT_MAX_PSD_DIM }
    }
}

/// A non-zero cone with its offset into the stacked `s` / `z` vectors.
#[derive(Debug, Clone, Copy)]
struct Slot {
    cone: Cone,
    offset: usize,
}

impl Slot {
    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.cone.dim()
    }
}

fn identity(cone: Cone) -> Vec<f64> {
    match cone {
        Cone::Nonneg(d) => vec![1.0; d],
        Cone::SecondOrder(d) => {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        }
        Cone::Psd(n) => svec(&DMatrix::identity(n, n)),
        Cone::Zero(_) => unreachable!("zero cone handled as equalities"),
    }
}

fn soc_det(x: &[f64]) -> f64 {
    x[0] * x[0] - x[1..].iter().map(|v| v * v).sum::<f64>()
}

fn min_eig(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Smallest `t` with `x + t e` on the cone boundary or inside (`-t` is the
/// "depth" of x in the cone).
fn boundary_offset(cone: Cone, x: &[f64]) -> f64 {
    match cone {
        Cone::Nonneg(_) => -x.iter().copied().fold(f64::INFINITY, f64::min),
        Cone::SecondOrder(_) => x[1..].iter().map(|v| v * v).sum::<f64>().sqrt() - x[0],
        Cone::Psd(n) => -min_eig(smat(x, n)),
        Cone::Zero(_) => unreachable!(),
    }
}

/// Largest `alpha >= 0` keeping `x + alpha d` in the cone (x interior).
fn max_step(cone: Cone, x: &[f64], d: &[f64]) -> f64 {
    match cone {
        Cone::Nonneg(_) => {
            x.iter().zip(d).filter(|(_, &di)| di < 0.0).map(|(&xi, &di)| -xi / di).fold(f64::INFINITY, f64::min)
        }
        Cone::SecondOrder(_) => {
            let a = soc_det(d);
            let b = 2.0 * (x[0] * d[0] - x[1..].iter().zip(&d[1..]).map(|(p, q)| p * q).sum::<f64>());
            let c = soc_det(x);
            smallest_positive_root(a, b, c)
        }
        Cone::Psd(n) => {
            let xm = smat(x, n);
            let dm = smat(d, n);
            let Some(chol) = xm.cholesky() else { return 0.0 };
            let l = chol.l();
            // M = L^{-1} D L^{-T}
            let y = l.solve_lower_triangular(&dm).unwrap_or_else(|| dm.clone());
            let m = l.solve_lower_triangular(&y.transpose()).unwrap_or(y);
            let m = 0.5 * (&m + m.transpose());
            let lmin = min_eig(m);
            if lmin >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / lmin
            }
        }
        Cone::Zero(_) => unreachable!(),
    }
}

fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return f64::INFINITY;
    }
    if a.abs() <= 1e-14 * scale {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = [q / a, if q != 0.0 { c / q } else { f64::INFINITY }];
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.into_iter().find(|&r| r > 0.0).unwrap_or(f64::INFINITY)
}

/// Jordan product `u o v`.
fn jordan(cone: Cone, u: &[f64], v: &[f64]) -> Vec<f64> {
    match cone {
        Cone::Nonneg(_) => u.iter().zip(v).map(|(a, b)| a * b).collect(),
        Cone::SecondOrder(_) => {
            let mut out = Vec::with_capacity(u.len());
            out.push(u.iter().zip(v).map(|(a, b)| a * b).sum());
            for i in 1..u.len() {
                out.push(u[0] * v[i] + v[0] * u[i]);
            }
            out
        }
        Cone::Psd(n) => {
            let um = smat(u, n);
            let vm = smat(v, n);
            svec(&(0.5 * (&um * &vm + &vm * &um)))
        }
        Cone::Zero(_) => unreachable!(),
    }
}

/// Solves `lambda o t = r`. For the PSD cone `lambda` must be diagonal,
/// which holds for the NT-scaled point.
fn jordan_solve(cone: Cone, lambda: &[f64], r: &[f64]) -> Vec<f64> {
    match cone {
        Cone::Nonneg(_) => r.iter().zip(lambda).map(|(a, b)| a / b).collect(),
        Cone::SecondOrder(_) => {
            let det = soc_det(lambda);
            let t0 = (lambda[0] * r[0] - lambda[1..].iter().zip(&r[1..]).map(|(a, b)| a * b).sum::<f64>()) / det;
            let mut out = vec![t0];
            for i in 1..r.len() {
                out.push((r[i] - t0 * lambda[i]) / lambda[0]);
            }
            out
        }
        Cone::Psd(n) => {
            let lm = smat(lambda, n);
            let mut out = vec![0.0; svec_len(n)];
            for j in 0..n {
                for i in 0..=j {
                    let k = crate::expr::svec_index(i, j);
                    out[k] = 2.0 * r[k] / (lm[(i, i)] + lm[(j, j)]);
                }
            }
            out
        }
        Cone::Zero(_) => unreachable!(),
    }
}

/// Nesterov-Todd scaling: returns `(W, lambda)` with `W z = W^{-T} s = lambda`.
fn nt_scaling(cone: Cone, s: &[f64], z: &[f64]) -> Option<(DMatrix<f64>, Vec<f64>)> {
    match cone {
        Cone::Nonneg(d) => {
            let w: Vec<f64> = s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect();
            let lambda = s.iter().zip(z).map(|(a, b)| (a * b).sqrt()).collect();
            Some((DMatrix::from_diagonal(&DVector::from_vec(w)).resize(d, d, 0.0), lambda))
        }
        Cone::SecondOrder(d) => {
            let sn = soc_det(s);
            let zn = soc_det(z);
            if sn <= 0.0 || zn <= 0.0 {
                return None;
            }
            let (sn, zn) = (sn.sqrt(), zn.sqrt());
            let beta = (sn / zn).sqrt();
            let sb: Vec<f64> = s.iter().map(|v| v / sn).collect();
            let zb: Vec<f64> = z.iter().map(|v| v / zn).collect();
            let gamma = ((1.0 + sb.iter().zip(&zb).map(|(a, b)| a * b).sum::<f64>()) / 2.0).sqrt();
            // wbar = (sbar + J zbar) / (2 gamma)
            let mut wb = vec![0.0; d];
            wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            for i in 1..d {
                wb[i] = (sb[i] - zb[i]) / (2.0 * gamma);
            }
            let denom = (2.0 * (wb[0] + 1.0)).sqrt();
            let mut v = wb.clone();
            v[0] += 1.0;
            v.iter_mut().for_each(|x| *x /= denom);
            let mut w = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    w[(i, j)] = 2.0 * v[i] * v[j];
                }
            }
            w[(0, 0)] -= 1.0;
            for i in 1..d {
                w[(i, i)] += 1.0;
            }
            w *= beta;
            let lambda = (&w * DVector::from_column_slice(z)).as_slice().to_vec();
            Some((w, lambda))
        }
        Cone::Psd(n) => {
            let ls = smat(s, n).cholesky()?.l();
            let lz = smat(z, n).cholesky()?.l();
            let svd = (lz.transpose() * &ls).svd(true, true);
            let v_t = svd.v_t?;
            let sig = svd.singular_values;
            if sig.iter().any(|&x| x <= 0.0) {
                return None;
            }
            let inv_sqrt = DMatrix::from_diagonal(&sig.map(|x| 1.0 / x.sqrt()));
            let r = &ls * v_t.transpose() * inv_sqrt;
            let m = svec_len(n);
            let mut w = DMatrix::zeros(m, m);
            let mut e = vec![0.0; m];
            for k in 0..m {
                e[k] = 1.0;
                let col = svec(&(r.transpose() * smat(&e, n) * &r));
                w.set_column(k, &DVector::from_vec(col));
                e[k] = 0.0;
            }
            let lambda = svec(&DMatrix::from_diagonal(&sig));
            Some((w, lambda))
        }
        Cone::Zero(_) => unreachable!(),
    }
}

struct Problem {
    n: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    c: DVector<f64>,
    slots: Vec<Slot>,
    degree: usize,
}

impl Problem {
    fn from_standard(sf: &StandardForm) -> Self {
        let n = sf.num_vars;
        let mut eq_rows = Vec::new();
        let mut cone_rows = Vec::new();
        let mut slots = Vec::new();
        let mut row = 0;
        let mut offset = 0;
        for &cone in &sf.cones {
            let d = cone.dim();
            match cone {
                Cone::Zero(_) => eq_rows.extend(row..row + d),
                _ => {
                    cone_rows.extend(row..row + d);
                    slots.push(Slot { cone, offset });
                    offset += d;
                }
            }
            row += d;
        }
        let mut row_map = vec![(false, 0usize); sf.num_rows()];
        for (k, &r) in eq_rows.iter().enumerate() {
            row_map[r] = (true, k);
        }
        for (k, &r) in cone_rows.iter().enumerate() {
            row_map[r] = (false, k);
        }
        let mut a = DMatrix::zeros(eq_rows.len(), n);
        let mut g = DMatrix::zeros(cone_rows.len(), n);
        for &(r, c, v) in &sf.a {
            match row_map[r] {
                (true, k) => a[(k, c)] += v,
                (false, k) => g[(k, c)] += v,
            }
        }
        let b = DVector::from_iterator(eq_rows.len(), eq_rows.iter().map(|&r| sf.b[r]));
        let h = DVector::from_iterator(cone_rows.len(), cone_rows.iter().map(|&r| sf.b[r]));
        let degree = slots.iter().map(|s| s.cone.degree()).sum();
        Problem { n, a, b, g, h, c: DVector::from_column_slice(&sf.c), slots, degree }
    }

    fn m(&self) -> usize {
        self.g.nrows()
    }

    fn p(&self) -> usize {
        self.a.nrows()
    }

    /// Assembles and factors `[[0, A', G'], [A, 0, 0], [G, 0, -H]]`.
    fn kkt(&self, hmat: &DMatrix<f64>) -> nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn> {
        let (n, p, m) = (self.n, self.p(), self.m());
        let mut k = DMatrix::zeros(n + p + m, n + p + m);
        k.view_mut((0, n), (n, p)).copy_from(&self.a.transpose());
        k.view_mut((0, n + p), (n, m)).copy_from(&self.g.transpose());
        k.view_mut((n, 0), (p, n)).copy_from(&self.a);
        k.view_mut((n + p, 0), (m, n)).copy_from(&self.g);
        k.view_mut((n + p, n + p), (m, m)).copy_from(&(-hmat));
        k.lu()
    }

    fn split(&self, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (n, p, m) = (self.n, self.p(), self.m());
        (v.rows(0, n).into_owned(), v.rows(n, p).into_owned(), v.rows(n + p, m).into_owned())
    }

    fn for_each_slot<F: FnMut(&Slot, std::ops::Range<usize>)>(&self, mut f: F) {
        for slot in &self.slots {
            f(slot, slot.range());
        }
    }

    fn shift_into_cone(&self, x: &mut DVector<f64>) {
        self.for_each_slot(|slot, r| {
            let t = boundary_offset(slot.cone, &x.as_slice()[r.clone()]);
            if t >= -1e-8 {
                let e = identity(slot.cone);
                for (xi, ei) in x.as_mut_slice()[r].iter_mut().zip(e) {
                    *xi += (1.0 + t) * ei;
                }
            }
        });
    }

    fn max_step(&self, x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
        self.slots
            .iter()
            .map(|slot| {
                let r = slot.range();
                max_step(slot.cone, &x.as_slice()[r.clone()], &dx.as_slice()[r])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

impl ConicBackend for DenseReferenceBackend {
    fn name(&self) -> &'static str {
        "dense-reference"
    }

    fn solve_standard(&self, sf: &StandardForm, opts: &SolveOptions) -> Result<RawSolution> {
        let psd: usize = sf.cones.iter().map(|c| if let Cone::Psd(n) = c { *n } else { 0 }).sum();
        if psd > self.max_psd_dim {
            return Err(ConicError::Backend(format!(
                "dense reference limited to total PSD order {}, program has {psd}",
                self.max_psd_dim
            )));
        }
        let prob = Problem::from_standard(sf);
        Ok(run(&prob, opts))
    }
}

fn trouble(x: DVector<f64>, iterations: u32, res: Residuals) -> RawSolution {
    RawSolution { status: SolveStatus::NumericalTrouble, x: x.as_slice().to_vec(), residuals: res, iterations }
}

fn run(prob: &Problem, opts: &SolveOptions) -> RawSolution {
    let (n, p, m) = (prob.n, prob.p(), prob.m());
    let tol = opts.tolerance;

    // Starting point from two least-squares solves with identity scaling.
    let kkt0 = prob.kkt(&DMatrix::identity(m, m));
    let mut rhs = DVector::zeros(n + p + m);
    rhs.rows_mut(n, p).copy_from(&prob.b);
    rhs.rows_mut(n + p, m).copy_from(&prob.h);
    let Some(sol) = kkt0.solve(&rhs) else {
        return trouble(DVector::zeros(n), 0, Residuals::default());
    };
    let (mut x, _, u) = prob.split(&sol);
    let mut s = -u;
    let mut rhs = DVector::zeros(n + p + m);
    rhs.rows_mut(0, n).copy_from(&(-&prob.c));
    let Some(sol) = kkt0.solve(&rhs) else {
        return trouble(x, 0, Residuals::default());
    };
    let (_, mut y, mut z) = prob.split(&sol);
    prob.shift_into_cone(&mut s);
    prob.shift_into_cone(&mut z);

    let bnorm = prob.b.norm().max(prob.h.norm()).max(1.0);
    let cnorm = prob.c.norm().max(1.0);
    let mut res = Residuals::default();

    for iter in 0..opts.max_iter {
        let rx = prob.a.transpose() * &y + prob.g.transpose() * &z + &prob.c;
        let ry = &prob.a * &x - &prob.b;
        let rz = &prob.g * &x + &s - &prob.h;
        let gap = s.dot(&z);
        let pcost = prob.c.dot(&x);
        let dcost = -prob.b.dot(&y) - prob.h.dot(&z);
        let pres = ry.norm().max(rz.norm()) / bnorm;
        let dres = rx.norm() / cnorm;
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        res = Residuals { primal_feas: pres, dual_feas: dres, gap: relgap.min(gap) };
        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            return trouble(x, iter, res);
        }
        if pres <= tol && dres <= tol && (gap <= tol || relgap <= tol) {
            return RawSolution {
                status: SolveStatus::Optimal,
                x: x.as_slice().to_vec(),
                residuals: res,
                iterations: iter,
            };
        }

        // Scaling.
        let mut w = DMatrix::zeros(m, m);
        let mut lambda = vec![0.0; m];
        let mut ok = true;
        prob.for_each_slot(|slot, r| match nt_scaling(slot.cone, &s.as_slice()[r.clone()], &z.as_slice()[r.clone()]) {
            Some((wb, lb)) => {
                w.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&wb);
                lambda[r].copy_from_slice(&lb);
            }
            None => ok = false,
        });
        if !ok {
            return trouble(x, iter, res);
        }
        let kkt = prob.kkt(&(w.transpose() * &w));
        let mu = gap / prob.degree.max(1) as f64;

        // Solves the Newton system for complementarity right-hand side rc
        // (in scaled coordinates) and residual weight `eta`.
        let newton = |rc: &[f64], eta: f64| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
            let mut t = vec![0.0; m];
            prob.for_each_slot(|slot, r| {
                let v = jordan_solve(slot.cone, &lambda[r.clone()], &rc[r.clone()]);
                t[r].copy_from_slice(&v);
            });
            let t = DVector::from_vec(t);
            let mut rhs = DVector::zeros(n + p + m);
            rhs.rows_mut(0, n).copy_from(&(-eta * &rx));
            rhs.rows_mut(n, p).copy_from(&(-eta * &ry));
            rhs.rows_mut(n + p, m).copy_from(&(-eta * &rz - w.transpose() * &t));
            let sol = kkt.solve(&rhs)?;
            let (dx, dy, dz) = prob.split(&sol);
            let ds = w.transpose() * (&t - &w * &dz);
            if !(dx.iter().chain(dz.iter()).all(|v| v.is_finite())) {
                return None;
            }
            Some((dx, dy, dz, ds))
        };

        // Predictor.
        let mut rc = vec![0.0; m];
        prob.for_each_slot(|slot, r| {
            let l = &lambda[r.clone()];
            let v = jordan(slot.cone, l, l);
            for (dst, src) in rc[r].iter_mut().zip(v) {
                *dst = -src;
            }
        });
        let Some((_, _, dz_a, ds_a)) = newton(&rc, 1.0) else {
            return trouble(x, iter, res);
        };
        let alpha_a = prob.max_step(&s, &ds_a).min(prob.max_step(&z, &dz_a)).min(1.0);
        let sigma = {
            let s_a = &s + alpha_a * &ds_a;
            let z_a = &z + alpha_a * &dz_a;
            (s_a.dot(&z_a) / gap).clamp(0.0, 1.0).powi(3)
        };

        // Corrector.
        // In scaled coordinates the affine step satisfies
        // W^{-T} ds_a + W dz_a = -lambda.
        let dz_scaled = &w * &dz_a;
        let ds_scaled = -DVector::from_column_slice(&lambda) - &dz_scaled;
        let e_all = {
            let mut e = vec![0.0; m];
            prob.for_each_slot(|slot, r| e[r].copy_from_slice(&identity(slot.cone)));
            e
        };
        prob.for_each_slot(|slot, r| {
            let cross = jordan(slot.cone, &ds_scaled.as_slice()[r.clone()], &dz_scaled.as_slice()[r.clone()]);
            for (k, idx) in r.clone().enumerate() {
                rc[idx] += -cross[k] + sigma * mu * e_all[idx];
            }
        });
        let Some((dx, dy, dz, ds)) = newton(&rc, 1.0 - sigma) else {
            return trouble(x, iter, res);
        };
        let alpha_max = prob.max_step(&s, &ds).min(prob.max_step(&z, &dz));
        let alpha = (0.99 * alpha_max).min(1.0);
        if alpha <= 1e-12 {
            return trouble(x, iter, res);
        }
        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
    }
    trouble(x, opts.max_iter, res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soc_scaling_maps_z_and_s_to_same_point() {
        let s = [3.0, 1.0, -0.5, 0.7];
        let z = [2.0, -0.4, 0.9, 0.1];
        let (w, lambda) = nt_scaling(Cone::SecondOrder(4), &s, &z).unwrap();
        let winv = w.clone().try_inverse().unwrap();
        let via_s = winv.transpose() * DVector::from_column_slice(&s);
        for i in 0..4 {
            assert!((via_s[i] - lambda[i]).abs() < 1e-12, "{via_s} vs {lambda:?}");
        }
    }

    #[test]
    fn psd_scaling_maps_z_and_s_to_diagonal_point() {
        let sm = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let zm = DMatrix::from_row_slice(3, 3, &[1.0, -0.3, 0.0, -0.3, 2.0, 0.4, 0.0, 0.4, 1.5]);
        let (s, z) = (svec(&sm), svec(&zm));
        let (w, lambda) = nt_scaling(Cone::Psd(3), &s, &z).unwrap();
        let wz = &w * DVector::from_vec(z);
        let winv_t = w.try_inverse().unwrap().transpose();
        let ws = winv_t * DVector::from_vec(s);
        for i in 0..6 {
            assert!((wz[i] - lambda[i]).abs() < 1e-10);
            assert!((ws[i] - lambda[i]).abs() < 1e-10);
        }
        let lm = smat(&lambda, 3);
        assert!((lm.clone() - DMatrix::from_diagonal(&lm.diagonal())).norm() < 1e-12);
    }

    #[test]
    fn jordan_solve_inverts_product() {
        let l = [2.0, 0.5, -0.3];
        let t = [0.7, -1.2, 0.4];
        let r = jordan(Cone::SecondOrder(3), &l, &t);
        let back = jordan_solve(Cone::SecondOrder(3), &l, &r);
        for i in 0..3 {
            assert!((back[i] - t[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn soc_step_to_boundary() {
        // x = (1, 0), d = (0, 1): boundary at alpha = 1
        assert!((max_step(Cone::SecondOrder(2), &[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-12);
        assert!(max_step(Cone::SecondOrder(2), &[1.0, 0.0], &[1.0, 0.0]).is_infinite());
        let psd = svec(&DMatrix::identity(2, 2));
        let d = svec(&DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]));
        assert!((max_step(Cone::Psd(2), &psd, &d) - 0.5).abs() < 1e-12);
    }
}
