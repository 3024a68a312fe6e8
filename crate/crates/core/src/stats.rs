//! Sample moments and dense symmetric eigen-factorizations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative diagonal floor added to every covariance before it is factored.
pub const REGULARIZATION_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub sample_count: usize,
}

/// Mean and unbiased (N-1) covariance of `points`, plus `regularization * I`.
pub fn sample_moments(points: &[DVector<f64>], regularization: f64) -> Result<Moments> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 points for a covariance, got {}", points.len())));
    }
    let n = points[0].len();
    if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != n) {
        return Err(Error::Shape(format!("point {i} has dimension {}, expected {n}", p.len())));
    }
    let count = points.len() as f64;
    let mut mean = DVector::zeros(n);
    for p in points {
        mean += p;
    }
    mean /= count;
    let mut cov = DMatrix::zeros(n, n);
    for p in points {
        let d = p - &mean;
        cov.syger(1.0, &d, &d, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    cov /= count - 1.0;
    for i in 0..n {
        cov[(i, i)] += regularization;
    }
    Ok(Moments { mean, covariance: cov, sample_count: points.len() })
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Shape(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::Shape(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(())
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// (columns). Each eigenvector's first nonzero component is made positive.
pub fn eig_sym(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_symmetric(m)?;
    let n = m.nrows();
    let eig = SymmetricEigen::new(0.5 * (m + m.transpose()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let lead = col.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(0.0);
        if lead < 0.0 {
            col.neg_mut();
        }
        vecs.set_column(dst, &col);
    }
    Ok((vals, vecs))
}

/// Class-wise moment profile with its eigendecomposition and ambiguity radii.
#[derive(Debug, Clone)]
pub struct MomentProfile {
    pub mean: DVector<f64>,
    /// Regularized covariance; every factor below reconstructs this matrix.
    pub covariance: DMatrix<f64>,
    /// `U D^{1/2}`.
    pub sqrt_factor: DMatrix<f64>,
    pub eigvecs: DMatrix<f64>,
    /// Descending.
    pub eigvals: DVector<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub sample_count: usize,
    pub floor: f64,
}

impl MomentProfile {
    pub fn from_moments(m: Moments, gamma1: f64, gamma2: f64) -> Result<Self> {
        Self::from_moments_with_min_floor(m, gamma1, gamma2, 1e-12)
    }

    /// As `from_moments`, with the diagonal floor never below `min_floor`.
    pub fn from_moments_with_min_floor(m: Moments, gamma1: f64, gamma2: f64, min_floor: f64) -> Result<Self> {
        if !(min_floor > 0.0 && min_floor.is_finite()) {
            return Err(Error::config("min_floor", format!("must be positive and finite, got {min_floor}")));
        }
        if !(gamma1 >= 0.0) {
            return Err(Error::config("gamma1", format!("must be >= 0, got {gamma1}")));
        }
        if !(gamma2 >= 1.0) {
            return Err(Error::config("gamma2", format!("must be >= 1, got {gamma2}")));
        }
        let n = m.mean.len();
        let floor = (REGULARIZATION_FLOOR * m.covariance.trace() / n as f64).max(min_floor);
        let mut cov = m.covariance;
        for i in 0..n {
            cov[(i, i)] += floor;
        }
        let (mut eigvals, eigvecs) = eig_sym(&cov)?;
        // roundoff can leave the smallest eigenvalues a hair below the floor
        for v in eigvals.iter_mut() {
            *v = v.max(floor);
        }
        let sqrt_factor = scale_columns(&eigvecs, eigvals.iter().map(|v| v.sqrt()));
        let cov = &sqrt_factor * sqrt_factor.transpose();
        Ok(MomentProfile {
            mean: m.mean,
            covariance: cov,
            sqrt_factor,
            eigvecs,
            eigvals,
            gamma1,
            gamma2,
            sample_count: m.sample_count,
            floor,
        })
    }

    pub fn estimate(points: &[DVector<f64>], gamma1: f64, gamma2: f64) -> Result<Self> {
        Self::from_moments(sample_moments(points, 0.0)?, gamma1, gamma2)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(S^{(r)}, S^{(n-r)})`: leading `r` and trailing `n - r` columns of the
    /// square-root factor.
    pub fn split_factor(&self, r: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let n = self.dim();
        if r < 1 || r > n {
            return Err(Error::Range(format!("rank {r} not in [1, {n}]")));
        }
        Ok((self.sqrt_factor.columns(0, r).into_owned(), self.sqrt_factor.columns(r, n - r).into_owned()))
    }

    /// Symmetric square root `U D^{1/2} U'`.
    pub fn sym_sqrt(&self) -> DMatrix<f64> {
        &self.sqrt_factor * self.eigvecs.transpose()
    }

    /// `U D^{-1/2} U'`.
    pub fn inv_sym_sqrt(&self) -> DMatrix<f64> {
        scale_columns(&self.eigvecs, self.eigvals.iter().map(|v| 1.0 / v.sqrt())) * self.eigvecs.transpose()
    }

    pub fn explained_fraction(&self, r: usize) -> f64 {
        let total: f64 = self.eigvals.iter().sum();
        self.eigvals.iter().take(r).sum::<f64>() / total
    }
}

fn scale_columns(m: &DMatrix<f64>, scales: impl Iterator<Item = f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, s) in scales.enumerate() {
        out.column_mut(j).scale_mut(s);
    }
    out
}
