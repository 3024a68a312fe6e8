//! Lowering of a [`ConicProgram`] to the standard form
//! `min c'x  s.t.  s = b - A x,  s in K`, with `K` a product of zero,
//! nonnegative, second-order and (svec) PSD cones.

use serde::Serialize;

use crate::expr::{svec_len, LinExpr};
use crate::program::{ConicProgram, ConstraintKind, NormOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    /// `(t, x)` with `||x||_2 <= t`; the size counts `t`.
    SecondOrder(usize),
    /// Order of the PSD matrix; occupies `n(n+1)/2` rows.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::Nonneg(d) | Cone::SecondOrder(d) => d,
            Cone::Psd(n) => svec_len(n),
        }
    }

    /// Barrier degree (contribution to the complementarity measure).
    pub fn degree(&self) -> usize {
        match *self {
            Cone::Zero(_) => 0,
            Cone::Nonneg(d) => d,
            Cone::SecondOrder(_) => 1,
            Cone::Psd(n) => n,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StandardForm {
    /// Program variables followed by auxiliary variables introduced here.
    pub num_vars: usize,
    pub num_program_vars: usize,
    pub c: Vec<f64>,
    pub objective_constant: f64,
    /// `(row, col, value)` entries of `A`, duplicates already summed.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl StandardForm {
    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn from_program(p: &ConicProgram) -> Self {
        let mut aux = p.num_vars;
        let mut zero: Vec<LinExpr> = Vec::new();
        let mut nonneg: Vec<LinExpr> = Vec::new();
        let mut socs: Vec<Vec<LinExpr>> = Vec::new();
        let mut psds: Vec<(usize, Vec<LinExpr>)> = Vec::new();

        for con in &p.constraints {
            match &con.kind {
                ConstraintKind::Equality { expr } => zero.push(expr.clone()),
                ConstraintKind::Inequality { expr } => nonneg.push(expr.clone()),
                ConstraintKind::SecondOrder { bound, args } => {
                    let mut rows = vec![bound.clone()];
                    rows.extend(args.iter().cloned());
                    socs.push(rows);
                }
                ConstraintKind::NormCap { order, bound, args } => match order {
                    NormOrder::L2 => {
                        let mut rows = vec![bound.clone()];
                        rows.extend(args.iter().cloned());
                        socs.push(rows);
                    }
                    NormOrder::Linf => {
                        for a in args {
                            nonneg.push(bound.clone() - a);
                            nonneg.push(bound.clone() + a);
                        }
                    }
                    NormOrder::L1 => {
                        // t_i >= |a_i|, sum t_i <= bound
                        let mut total = bound.clone();
                        for a in args {
                            let t = LinExpr::term(aux, 1.0);
                            aux += 1;
                            nonneg.push(t.clone() - a);
                            nonneg.push(t.clone() + a);
                            total -= t;
                        }
                        nonneg.push(total);
                    }
                },
                ConstraintKind::Psd { dim, upper } => {
                    let mut rows = Vec::with_capacity(upper.len());
                    let mut k = 0;
                    for j in 0..*dim {
                        for i in 0..=j {
                            let e = &upper[k];
                            rows.push(if i == j { e.clone() } else { e.scaled(std::f64::consts::SQRT_2) });
                            k += 1;
                        }
                    }
                    psds.push((*dim, rows));
                }
            }
        }

        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let emit = |e: &LinExpr, a: &mut Vec<(usize, usize, f64)>, b: &mut Vec<f64>| {
            let row = b.len();
            let e = e.coalesced();
            for (v, c) in e.terms {
                a.push((row, v, -c));
            }
            b.push(e.constant);
        };
        if !zero.is_empty() {
            zero.iter().for_each(|e| emit(e, &mut a, &mut b));
            cones.push(Cone::Zero(zero.len()));
        }
        if !nonneg.is_empty() {
            nonneg.iter().for_each(|e| emit(e, &mut a, &mut b));
            cones.push(Cone::Nonneg(nonneg.len()));
        }
        for rows in &socs {
            rows.iter().for_each(|e| emit(e, &mut a, &mut b));
            cones.push(Cone::SecondOrder(rows.len()));
        }
        for (n, rows) in &psds {
            rows.iter().for_each(|e| emit(e, &mut a, &mut b));
            cones.push(Cone::Psd(*n));
        }

        let mut c = vec![0.0; aux];
        let obj = p.objective.coalesced();
        for (v, coef) in obj.terms {
            c[v] += coef;
        }

        StandardForm { num_vars: aux, num_program_vars: p.num_vars, c, objective_constant: obj.constant, a, b, cones }
    }

    /// Slack `s = b - A x` for a full-length `x`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.b.clone();
        for &(r, c, v) in &self.a {
            s[r] -= v * x[c];
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::ConicProgram;

    #[test]
    fn norm_caps_expand_to_expected_cones() {
        let mut p = ConicProgram::new();
        let x = p.add_vector("x", 3);
        p.add_norm_cap("l1", NormOrder::L1, x.exprs(), LinExpr::constant(1.0));
        p.add_norm_cap("linf", NormOrder::Linf, x.exprs(), LinExpr::constant(1.0));
        p.add_norm_cap("l2", NormOrder::L2, x.exprs(), LinExpr::constant(1.0));
        let sf = StandardForm::from_program(&p);
        // three aux vars for the l1 cap
        assert_eq!(sf.num_vars, 6);
        // l1: 2*3 + 1 rows, linf: 2*3 rows
        assert_eq!(sf.cones, vec![Cone::Nonneg(13), Cone::SecondOrder(4)]);
    }

    #[test]
    fn psd_rows_use_sqrt2_scaling() {
        let mut p = ConicProgram::new();
        let x = p.add_sym_matrix("X", 2);
        p.add_psd_var("X psd", &x);
        let sf = StandardForm::from_program(&p);
        assert_eq!(sf.cones, vec![Cone::Psd(2)]);
        // s = svec(X) = x exactly: A = -I
        let mut a = sf.a.clone();
        a.sort_by(|l, r| l.partial_cmp(r).unwrap());
        for (k, &(r, c, v)) in a.iter().enumerate() {
            assert_eq!((r, c), (k, k));
            assert!((v + 1.0).abs() < 1e-15);
        }
    }
}
