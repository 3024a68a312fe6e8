//! Affine expressions over the flat variable vector of a [`ConicProgram`].
//!
//! [`ConicProgram`]: crate::ConicProgram

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Position of entry `(i, j)`, `i <= j`, in the column-major upper-triangle
/// svec layout: `j * (j + 1) / 2 + i`.
#[inline]
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Number of svec entries of an `n x n` symmetric matrix.
#[inline]
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packs a symmetric matrix into svec form (off-diagonals scaled by sqrt 2).
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; svec_len(n)];
    for j in 0..n {
        for i in 0..=j {
            let v = if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) * std::f64::consts::SQRT_2 };
            out[svec_index(i, j)] = v;
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let x = v[svec_index(i, j)];
            if i == j {
                m[(i, i)] = x;
            } else {
                let x = x * std::f64::consts::FRAC_1_SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
    }
    m
}

/// `sum_k coef_k * x[var_k] + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(var: usize, coef: f64) -> Self {
        Self { terms: vec![(var, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, var: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
        self
    }

    pub fn add_const(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        if scale != 0.0 {
            self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
            self.constant += scale * other.constant;
        }
        self
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::zero();
        out.add_scaled(self, scale);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>() + self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|&(v, _)| v).max()
    }

    /// Merges duplicate variables and drops zero coefficients; terms come
    /// out sorted by variable index.
    pub fn coalesced(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        LinExpr { terms: merged, constant: self.constant }
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl AddAssign<LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl SubAssign<&LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, -1.0);
    }
}

impl SubAssign<LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: LinExpr) {
        self.add_scaled(&rhs, -1.0);
    }
}

impl AddAssign<f64> for LinExpr {
    fn add_assign(&mut self, rhs: f64) {
        self.constant += rhs;
    }
}

impl SubAssign<f64> for LinExpr {
    fn sub_assign(&mut self, rhs: f64) {
        self.constant -= rhs;
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self += rhs;
        self
    }
}

impl Add<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: &LinExpr) -> LinExpr {
        self += rhs;
        self
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self -= rhs;
        self
    }
}

impl Sub<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: &LinExpr) -> LinExpr {
        self -= rhs;
        self
    }
}

impl Sub<f64> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: f64) -> LinExpr {
        self.constant -= rhs;
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

/// `sum_i a_i * xs_i`.
pub fn dot(a: &[f64], xs: &[LinExpr]) -> LinExpr {
    assert_eq!(a.len(), xs.len(), "dot: length mismatch");
    let mut out = LinExpr::zero();
    for (ai, xi) in a.iter().zip(xs) {
        out.add_scaled(xi, *ai);
    }
    out
}

/// Matrix times expression vector.
pub fn mat_vec(m: &DMatrix<f64>, xs: &[LinExpr]) -> Vec<LinExpr> {
    assert_eq!(m.ncols(), xs.len(), "mat_vec: shape mismatch");
    (0..m.nrows())
        .map(|i| {
            let mut e = LinExpr::zero();
            for (j, xj) in xs.iter().enumerate() {
                e.add_scaled(xj, m[(i, j)]);
            }
            e
        })
        .collect()
}

/// Elementwise `a + b`.
pub fn vec_add(a: &[LinExpr], b: &[LinExpr]) -> Vec<LinExpr> {
    assert_eq!(a.len(), b.len(), "vec_add: length mismatch");
    a.iter().zip(b).map(|(x, y)| x.clone() + y).collect()
}

/// Elementwise `scale * a`.
pub fn vec_scale(a: &[LinExpr], scale: f64) -> Vec<LinExpr> {
    a.iter().map(|x| x.scaled(scale)).collect()
}

/// A scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarVar {
    pub index: usize,
}

impl ScalarVar {
    pub fn expr(&self) -> LinExpr {
        LinExpr::term(self.index, 1.0)
    }
}

/// A vector decision variable occupying `len` consecutive slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorVar {
    pub start: usize,
    pub len: usize,
}

impl VectorVar {
    pub fn at(&self, i: usize) -> LinExpr {
        assert!(i < self.len, "vector index {i} out of range {}", self.len);
        LinExpr::term(self.start + i, 1.0)
    }

    pub fn exprs(&self) -> Vec<LinExpr> {
        (0..self.len).map(|i| self.at(i)).collect()
    }

    pub fn dot(&self, a: &[f64]) -> LinExpr {
        assert_eq!(a.len(), self.len);
        let mut e = LinExpr::zero();
        for (i, &ai) in a.iter().enumerate() {
            e.add_term(self.start + i, ai);
        }
        e
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// A symmetric `n x n` matrix variable stored in svec form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymMatrixVar {
    pub start: usize,
    pub n: usize,
}

impl SymMatrixVar {
    /// Expression for the matrix entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> LinExpr {
        assert!(i < self.n && j < self.n);
        let coef = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
        LinExpr::term(self.start + svec_index(i, j), coef)
    }

    /// Frobenius inner product `X . M` for a (symmetrized) constant `M`.
    pub fn inner(&self, m: &DMatrix<f64>) -> LinExpr {
        assert_eq!((m.nrows(), m.ncols()), (self.n, self.n));
        let mut e = LinExpr::zero();
        for j in 0..self.n {
            for i in 0..=j {
                let coef = if i == j {
                    m[(i, i)]
                } else {
                    // X_ij = x/sqrt2 appears twice
                    (m[(i, j)] + m[(j, i)]) * std::f64::consts::FRAC_1_SQRT_2
                };
                e.add_term(self.start + svec_index(i, j), coef);
            }
        }
        e
    }

    pub fn trace(&self) -> LinExpr {
        let mut e = LinExpr::zero();
        for i in 0..self.n {
            e.add_term(self.start + svec_index(i, i), 1.0);
        }
        e
    }

    /// `X a` as an expression vector.
    pub fn mul_vec(&self, a: &[f64]) -> Vec<LinExpr> {
        assert_eq!(a.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut e = LinExpr::zero();
                for (j, &aj) in a.iter().enumerate() {
                    e.add_scaled(&self.entry(i, j), aj);
                }
                e
            })
            .collect()
    }

    pub fn svec_len(&self) -> usize {
        svec_len(self.n)
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.svec_len()
    }
}
